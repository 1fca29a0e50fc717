//! FIFO queueing, per-hop and end-to-end delay accounting, and
//! flow-conservation validation for routed demands.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DemandId(pub u32);

impl DemandId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for DemandId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One hop of a demand's journey. `from == to` records a slot the demand
/// spent waiting (queued or deliberately held) rather than moving.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub slot: u64,
    pub queue_delay: f64,
    pub tx_delay: f64,
    pub clipped: bool,
    pub followed_specified_path: bool,
}

impl HopRecord {
    pub fn delay(&self) -> f64 {
        self.queue_delay + self.tx_delay
    }

    pub fn is_wait(&self) -> bool {
        self.from == self.to
    }
}

/// A routed unit of traffic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Demand {
    pub id: DemandId,
    pub source: NodeId,
    pub destination: NodeId,
    /// Payload size in bits.
    pub size_bits: f64,
    pub birth_slot: u64,
    /// Transmit hops only, in order; waiting is accounted separately.
    pub path: Vec<HopRecord>,
    pub delivered: bool,
    pub dropped: bool,
    /// Sum of (queue + tx) delay over the recorded hops.
    pub accumulated_delay: f64,
}

impl Demand {
    pub fn new(id: DemandId, source: NodeId, destination: NodeId, size_bits: f64, birth_slot: u64) -> Self {
        Demand {
            id,
            source,
            destination,
            size_bits,
            birth_slot,
            path: Vec::new(),
            delivered: false,
            dropped: false,
            accumulated_delay: 0.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("queue full at capacity {capacity}")]
    QueueFull { capacity: usize },
    #[error("queue identity breach: {prev} + {rx} - {tx} leaves [0, {c_max}]")]
    InvariantBreach { prev: usize, rx: usize, tx: usize, c_max: usize },
    #[error("demand {0} has no chosen next hop this slot")]
    NoRoute(DemandId),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("demand {0} not delivered")]
    NotDelivered(DemandId),
}

/// Strict first-in-first-out buffer with bounded capacity.
#[derive(Debug, Clone)]
pub struct FifoQueue {
    entries: VecDeque<DemandId>,
    capacity: usize,
}

impl FifoQueue {
    pub fn new(capacity: usize) -> Self {
        FifoQueue { entries: VecDeque::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn head(&self) -> Option<DemandId> {
        self.entries.front().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = DemandId> + '_ {
        self.entries.iter().copied()
    }

    /// Appends at the tail; fails (and the demand is dropped by the caller)
    /// when the buffer is at capacity.
    pub fn enqueue(&mut self, d: DemandId) -> Result<(), TrafficError> {
        if self.entries.len() >= self.capacity {
            return Err(TrafficError::QueueFull { capacity: self.capacity });
        }
        self.entries.push_back(d);
        Ok(())
    }

    pub fn pop_head(&mut self) -> Option<DemandId> {
        self.entries.pop_front()
    }

    /// Removes a demand wherever it sits (isolation re-injection).
    pub fn remove(&mut self, d: DemandId) -> bool {
        if let Some(pos) = self.entries.iter().position(|&x| x == d) {
            self.entries.remove(pos);
            true
        } else {
            false
        }
    }
}

/// Queue-length identity `C(t) = C(t-1) + rx - tx`, checked against
/// `[0, c_max]`. A breach signals a simulator bug, not an input error.
pub fn update_queue_length(
    c_prev: usize,
    rx_prev: usize,
    tx_prev: usize,
    c_max: usize,
) -> Result<usize, TrafficError> {
    let next = c_prev as i64 + rx_prev as i64 - tx_prev as i64;
    if next < 0 || next > c_max as i64 {
        return Err(TrafficError::InvariantBreach { prev: c_prev, rx: rx_prev, tx: tx_prev, c_max });
    }
    Ok(next as usize)
}

/// Queue delay seen by a demand arriving behind the current queue: the sum
/// of `size / rate(next hop)` over queued demands, each using the rate of
/// its own chosen next hop this slot.
pub fn queue_delay(
    queue: &FifoQueue,
    next_hop: &BTreeMap<DemandId, (f64, f64)>,
) -> Result<f64, TrafficError> {
    let mut total = 0.0;
    for d in queue.iter() {
        let (bits, rate) = next_hop.get(&d).copied().ok_or(TrafficError::NoRoute(d))?;
        if rate <= 0.0 {
            return Err(TrafficError::Domain(format!("rate must be positive, got {rate}")));
        }
        total += bits / rate;
    }
    Ok(total)
}

/// One-hop transmission delay `L / rate`.
pub fn transmission_delay(bits: f64, rate: f64) -> Result<f64, TrafficError> {
    if rate <= 0.0 {
        return Err(TrafficError::Domain(format!("rate must be positive, got {rate}")));
    }
    Ok(bits / rate)
}

/// Combines queue and transmission delay for one hop; the `clipped` flag
/// marks delays past the one-hop tolerance (the reward layer charges at
/// most `t_one_max`).
pub fn hop_delay(queue_d: f64, tx_d: f64, t_one_max: f64) -> (f64, bool) {
    let delay = queue_d + tx_d;
    (delay, delay > t_one_max)
}

/// End-to-end delay of a delivered demand: the sum of (queue + tx) delays
/// over its transmit hops.
pub fn end_to_end_delay(d: &Demand) -> Result<f64, TrafficError> {
    if !d.delivered {
        return Err(TrafficError::NotDelivered(d.id));
    }
    Ok(d.path.iter().filter(|h| !h.is_wait()).map(|h| h.delay()).sum())
}

/// One routing decision applied to a demand within a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStep {
    Transmit { demand: DemandId, from: NodeId, to: NodeId },
    Hold { demand: DemandId, at: NodeId },
}

impl FlowStep {
    pub fn demand(&self) -> DemandId {
        match *self {
            FlowStep::Transmit { demand, .. } | FlowStep::Hold { demand, .. } => demand,
        }
    }
}

/// All routing decisions taken in one slot.
#[derive(Debug, Clone, Default)]
pub struct SlotAssignments {
    pub slot: u64,
    pub steps: Vec<FlowStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowViolation {
    /// More than one assignment for a demand in one slot (a source or relay
    /// may hand a demand to exactly one receiver).
    Duplicate { demand: DemandId, slot: u64 },
    /// An alive demand received no assignment (it must be forwarded or
    /// held every slot).
    Gap { demand: DemandId, slot: u64 },
    /// The assignment does not start where the demand currently sits.
    BrokenChain { demand: DemandId, slot: u64, expected: NodeId, got: NodeId },
    /// Activity recorded after the demand already reached its destination.
    AfterDelivery { demand: DemandId, slot: u64 },
    /// The destination forwarded the demand onward.
    DestinationForwarded { demand: DemandId, slot: u64 },
}

impl std::fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowViolation::Duplicate { demand, slot } => {
                write!(f, "demand {demand}: multiple assignments in slot {slot}")
            }
            FlowViolation::Gap { demand, slot } => {
                write!(f, "demand {demand}: no assignment in slot {slot} while in flight")
            }
            FlowViolation::BrokenChain { demand, slot, expected, got } => write!(
                f,
                "demand {demand}: slot {slot} acts at node {got} but the demand sits at {expected}"
            ),
            FlowViolation::AfterDelivery { demand, slot } => {
                write!(f, "demand {demand}: assignment in slot {slot} after delivery")
            }
            FlowViolation::DestinationForwarded { demand, slot } => {
                write!(f, "demand {demand}: destination forwarded it in slot {slot}")
            }
        }
    }
}

/// Checks a routing trace against the flow constraints: single emission per
/// slot, relay conservation with the hold (self-loop) term, exactly one
/// path per demand, and single reception at the destination.
pub fn validate_flow(demands: &[Demand], trace: &[SlotAssignments]) -> Vec<FlowViolation> {
    let mut violations = Vec::new();
    for demand in demands {
        let mut holder = demand.source;
        let mut delivered = false;
        let mut seen = false;
        for slot_entry in trace {
            if slot_entry.slot < demand.birth_slot {
                continue;
            }
            let steps: Vec<&FlowStep> =
                slot_entry.steps.iter().filter(|s| s.demand() == demand.id).collect();
            if delivered {
                if !steps.is_empty() {
                    violations.push(FlowViolation::AfterDelivery { demand: demand.id, slot: slot_entry.slot });
                }
                continue;
            }
            if steps.len() > 1 {
                violations.push(FlowViolation::Duplicate { demand: demand.id, slot: slot_entry.slot });
                continue;
            }
            let Some(step) = steps.first() else {
                if seen {
                    // In flight but unassigned: conservation broken.
                    violations.push(FlowViolation::Gap { demand: demand.id, slot: slot_entry.slot });
                }
                continue;
            };
            seen = true;
            match **step {
                FlowStep::Hold { demand: _, at } => {
                    if at != holder {
                        violations.push(FlowViolation::BrokenChain {
                            demand: demand.id,
                            slot: slot_entry.slot,
                            expected: holder,
                            got: at,
                        });
                        holder = at;
                    }
                }
                FlowStep::Transmit { demand: _, from, to } => {
                    if from != holder {
                        violations.push(FlowViolation::BrokenChain {
                            demand: demand.id,
                            slot: slot_entry.slot,
                            expected: holder,
                            got: from,
                        });
                    }
                    if from == demand.destination {
                        violations.push(FlowViolation::DestinationForwarded {
                            demand: demand.id,
                            slot: slot_entry.slot,
                        });
                    }
                    holder = to;
                    if to == demand.destination {
                        delivered = true;
                    }
                }
            }
        }
    }
    violations
}
