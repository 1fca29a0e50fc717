//! Link budget and energy accounting.
//!
//! The channel is a free-space path loss model feeding a Shannon rate; the
//! energy side covers radio electronics per bit, the power-amplifier d^2
//! term, and the rotorcraft hover/move power curve, with a per-slot budget
//! check against the usable fraction of capacity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Free-space channel parameters. All values are linear SI units; dB/dBm
/// inputs are converted once at config load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub theta: f64,
    /// Carrier frequency (Hz).
    pub freq: f64,
    /// Propagation speed (m/s).
    pub light_speed: f64,
    /// Noise power (W).
    pub noise_power: f64,
    /// Channel bandwidth (Hz).
    pub bandwidth: f64,
    /// Transmission power (W).
    pub tx_power: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            theta: 2.0,
            freq: 2.4e9,
            light_speed: 3.0e8,
            // -110 dBm
            noise_power: 1.0e-14,
            bandwidth: 2.0e6,
            tx_power: 0.1,
        }
    }
}

/// Rotorcraft energy model parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Radio electronics energy (J/bit).
    pub e_elec: f64,
    /// Power-amplifier free-space factor (J/(bit*m^2)).
    pub xi_fs: f64,
    /// Airframe mass (kg).
    pub mass: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Blade profile power at hover (W).
    pub p_blade: f64,
    /// Induced power at hover (W).
    pub p_induced: f64,
    /// Rotor tip speed (m/s).
    pub u_tip: f64,
    /// Mean rotor induced velocity at hover (m/s).
    pub v0: f64,
    /// Airframe drag ratio.
    pub drag_ratio: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
    /// Rotor solidity.
    pub rotor_solidity: f64,
    /// Rotor disk area (m^2).
    pub rotor_area: f64,
    /// Usable fraction of the per-slot energy capacity.
    pub beta: f64,
    /// Per-slot energy capacity (J).
    pub e_max: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_elec: 1.5e-4,
            xi_fs: 2.5e-8,
            mass: 2.0,
            gravity: 9.8,
            p_blade: 9.1827,
            p_induced: 11.5274,
            u_tip: 60.0,
            v0: 2.4868,
            drag_ratio: 0.5017,
            air_density: 1.205,
            rotor_solidity: 0.0832,
            rotor_area: 0.2827,
            beta: 0.7,
            e_max: 5000.0,
        }
    }
}

/// Linear free-space path loss `d^theta * (4*pi*f/c)^2`.
pub fn path_loss(d: f64, p: &ChannelParams) -> Result<f64, ChannelError> {
    if d <= 0.0 {
        return Err(ChannelError::Domain(format!("path_loss requires d > 0, got {d}")));
    }
    let k = 4.0 * std::f64::consts::PI * p.freq / p.light_speed;
    Ok(d.powf(p.theta) * k * k)
}

/// Shannon rate `B * log2(1 + SNR)` in bits/s over distance `d`.
pub fn link_rate(d: f64, p: &ChannelParams) -> Result<f64, ChannelError> {
    let loss = path_loss(d, p)?;
    let snr = p.tx_power / (p.noise_power * loss);
    Ok(p.bandwidth * (1.0 + snr).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityCheck {
    Ok,
    Violation,
}

/// Verifies the per-slot link capacity: the bits assigned to a link cannot
/// exceed `tau * rate` (inclusive).
pub fn check_link_capacity(assigned_bits: &[f64], rate: f64, tau: f64) -> CapacityCheck {
    let total: f64 = assigned_bits.iter().sum();
    if total <= tau * rate {
        CapacityCheck::Ok
    } else {
        CapacityCheck::Violation
    }
}

/// A transmission leaving a node: payload bits and hop distance in meters.
#[derive(Debug, Clone, Copy)]
pub struct Transmission {
    pub bits: f64,
    pub distance: f64,
}

/// Communication energy for one node over one slot: `E_elec` per received
/// bit, `E_elec + xi_fs * d^2` per transmitted bit.
pub fn comm_energy(
    _node: NodeId,
    received_bits: &[f64],
    transmitted: &[Transmission],
    ep: &EnergyParams,
) -> f64 {
    let e_rx: f64 = received_bits.iter().map(|bits| bits * ep.e_elec).sum();
    let e_tx: f64 = transmitted
        .iter()
        .map(|t| t.bits * (ep.e_elec + ep.xi_fs * t.distance * t.distance))
        .sum();
    e_rx + e_tx
}

/// Rotor power at forward speed `v`: blade profile, induced, and parasite
/// terms.
pub fn hover_power(v: f64, ep: &EnergyParams) -> Result<f64, ChannelError> {
    let v2 = v * v;
    let blade = ep.p_blade * (1.0 + 3.0 * v2 / (ep.u_tip * ep.u_tip));
    let v0_4 = ep.v0.powi(4);
    let radicand = (1.0 + v2 * v2 / (4.0 * v0_4)).sqrt() - v2 / (2.0 * v0_4);
    if radicand < 0.0 {
        return Err(ChannelError::Domain(format!(
            "induced-power radicand negative at v = {v} m/s"
        )));
    }
    let induced = ep.p_induced * radicand.sqrt();
    let parasite = 0.5 * ep.drag_ratio * ep.air_density * ep.rotor_solidity * ep.rotor_area * v2 * v;
    Ok(blade + induced + parasite)
}

/// Mobility energy over one slot: hover power at the (constant) slot speed
/// integrated over `tau`, plus the signed kinetic change and the potential
/// term for altitude gained.
pub fn mobility_energy(
    v_start: f64,
    v_end: f64,
    delta_z: f64,
    tau: f64,
    ep: &EnergyParams,
) -> Result<f64, ChannelError> {
    let hover = hover_power(v_start, ep)? * tau;
    let kinetic = 0.5 * ep.mass * (v_end * v_end - v_start * v_start);
    let potential = ep.gravity * ep.mass * delta_z;
    Ok(hover + kinetic + potential)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetCheck {
    Ok,
    Violation,
}

/// Per-slot energy budget: consumption must not exceed `beta * E_max`.
pub fn check_energy_budget(consumed: f64, ep: &EnergyParams) -> BudgetCheck {
    if consumed <= ep.beta * ep.e_max {
        BudgetCheck::Ok
    } else {
        BudgetCheck::Violation
    }
}
