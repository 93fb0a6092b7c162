// SPDX-License-Identifier: Apache-2.0

//! Domain types for the drayage network: hubs, lanes, carriers, states,
//! decisions and per-stage realizations, together with the stage cost
//! functions and the deterministic state transition.
//!
//! Stages are indexed from 0 throughout the crate. All TEU quantities are
//! continuous and nonnegative.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for complementarity and sign checks on states.
pub const STATE_TOL: f64 = 1e-9;

/// An origin-destination pair (entry hub index, exit hub index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lane {
    pub entry: usize,
    pub exit: usize,
}

impl Lane {
    pub fn new(entry: usize, exit: usize) -> Self {
        Lane { entry, exit }
    }

    /// Row-major position among all `num_entries x num_exits` lanes.
    pub fn index(&self, num_exits: usize) -> usize {
        self.entry * num_exits + self.exit
    }
}

/// A lane served under contract at a fixed per-TEU rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractLane {
    pub lane: Lane,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub id: String,
    pub contract_lanes: Vec<ContractLane>,
    /// Contract capacity per stage, TEU.
    pub contract_capacity: Vec<f64>,
    /// Spot capacity per stage, TEU. The spot block may serve every lane.
    pub spot_capacity: Vec<f64>,
}

impl Carrier {
    pub fn contract_rate(&self, lane: Lane) -> Option<f64> {
        self.contract_lanes.iter().find(|c| c.lane == lane).map(|c| c.rate)
    }
}

/// Linear, time-homogeneous inventory cost coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Holding cost per TEU at each entry hub.
    pub entry_holding: Vec<f64>,
    /// Holding cost per TEU at each exit hub.
    pub exit_holding: Vec<f64>,
    /// Penalty per TEU of unmet outflow at each exit hub.
    pub shortage_penalty: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub entry_hubs: Vec<String>,
    pub exit_hubs: Vec<String>,
    pub horizon: usize,
    pub carriers: Vec<Carrier>,
    pub cost: CostParams,
    pub entry_capacity: Vec<f64>,
    pub exit_capacity: Vec<f64>,
    /// Optional cap on the carried shortage at each exit hub. Off by default.
    #[serde(default)]
    pub shortage_limit: Option<Vec<f64>>,
    pub initial_state: SystemState,
}

impl Instance {
    pub fn num_entries(&self) -> usize {
        self.entry_hubs.len()
    }

    pub fn num_exits(&self) -> usize {
        self.exit_hubs.len()
    }

    pub fn num_lanes(&self) -> usize {
        self.num_entries() * self.num_exits()
    }

    pub fn num_carriers(&self) -> usize {
        self.carriers.len()
    }

    /// Dimension of the state vector: entry stocks, exit stocks, exit shortages.
    pub fn state_dim(&self) -> usize {
        self.num_entries() + 2 * self.num_exits()
    }

    /// All lanes in row-major order.
    pub fn lanes(&self) -> impl Iterator<Item = Lane> + '_ {
        let nj = self.num_exits();
        (0..self.num_lanes()).map(move |l| Lane::new(l / nj, l % nj))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Number of flow dimensions (entry hubs then exit hubs).
    pub fn flow_dim(&self) -> usize {
        self.num_entries() + self.num_exits()
    }

    pub fn validate(&self) -> Result<()> {
        let (ni, nj) = (self.num_entries(), self.num_exits());
        if ni == 0 || nj == 0 {
            return Err(Error::validation("entry_hubs and exit_hubs must be non-empty"));
        }
        let mut ids = HashSet::new();
        for id in self.entry_hubs.iter().chain(&self.exit_hubs) {
            if !ids.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate hub id {id:?}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::validation("horizon must be at least 1"));
        }
        check_vec("entry_capacity", &self.entry_capacity, ni)?;
        check_vec("exit_capacity", &self.exit_capacity, nj)?;
        check_vec("cost.entry_holding", &self.cost.entry_holding, ni)?;
        check_vec("cost.exit_holding", &self.cost.exit_holding, nj)?;
        check_vec("cost.shortage_penalty", &self.cost.shortage_penalty, nj)?;
        if let Some(limit) = &self.shortage_limit {
            check_vec("shortage_limit", limit, nj)?;
        }
        let mut carrier_ids = HashSet::new();
        for (k, c) in self.carriers.iter().enumerate() {
            if !carrier_ids.insert(c.id.as_str()) {
                return Err(Error::validation(format!("duplicate carrier id {:?}", c.id)));
            }
            let name = format!("carriers[{k}]");
            check_vec(&format!("{name}.contract_capacity"), &c.contract_capacity, self.horizon)?;
            check_vec(&format!("{name}.spot_capacity"), &c.spot_capacity, self.horizon)?;
            let mut seen = HashSet::new();
            for cl in &c.contract_lanes {
                if cl.lane.entry >= ni || cl.lane.exit >= nj {
                    return Err(Error::validation(format!(
                        "{name}.contract_lanes: lane ({}, {}) outside the hub sets",
                        cl.lane.entry, cl.lane.exit
                    )));
                }
                if !seen.insert(cl.lane) {
                    return Err(Error::validation(format!(
                        "{name}.contract_lanes: lane ({}, {}) listed twice",
                        cl.lane.entry, cl.lane.exit
                    )));
                }
                if !(cl.rate.is_finite() && cl.rate >= 0.0) {
                    return Err(Error::validation(format!("{name}.contract_lanes: invalid rate {}", cl.rate)));
                }
            }
        }
        let s = &self.initial_state;
        s.validate(ni, nj).map_err(|e| e.context("initial_state"))?;
        for i in 0..ni {
            if s.entry_stock[i] > self.entry_capacity[i] + STATE_TOL {
                return Err(Error::validation(format!("initial_state.entry_stock[{i}] exceeds entry_capacity")));
            }
        }
        for j in 0..nj {
            if s.exit_stock[j] > self.exit_capacity[j] + STATE_TOL {
                return Err(Error::validation(format!("initial_state.exit_stock[{j}] exceeds exit_capacity")));
            }
        }
        Ok(())
    }

    /// Checks a realization's dimensions against this instance.
    pub fn check_realization(&self, r: &StageRealization) -> Result<()> {
        if r.inflow.len() != self.num_entries() || r.outflow.len() != self.num_exits() {
            return Err(Error::structural("realization flow dimensions do not match the hub sets"));
        }
        if r.spot_rate.num_exits != self.num_exits()
            || r.spot_rate.rates.len() != self.num_carriers()
            || r.spot_rate.rates.iter().any(|v| v.len() != self.num_lanes())
        {
            return Err(Error::structural("spot rate table does not cover carriers x lanes"));
        }
        if r.inflow.iter().chain(&r.outflow).any(|&v| !(v >= 0.0)) {
            return Err(Error::validation("realization flows must be nonnegative"));
        }
        Ok(())
    }
}

fn check_vec(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::validation(format!("{name}: expected {len} entries, found {}", v.len())));
    }
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::validation(format!("{name}: value {x} must be finite and nonnegative")));
    }
    Ok(())
}

/// Stock position of the network at the start of a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemState {
    pub entry_stock: Vec<f64>,
    pub exit_stock: Vec<f64>,
    pub exit_shortage: Vec<f64>,
}

impl SystemState {
    pub fn zeros(num_entries: usize, num_exits: usize) -> Self {
        SystemState {
            entry_stock: vec![0.0; num_entries],
            exit_stock: vec![0.0; num_exits],
            exit_shortage: vec![0.0; num_exits],
        }
    }

    /// Builds a state from entry stocks and net exit positions, splitting
    /// each net position canonically into stock and shortage.
    pub fn from_net(entry_stock: Vec<f64>, net_exit: &[f64]) -> Self {
        SystemState {
            entry_stock,
            exit_stock: net_exit.iter().map(|&n| n.max(0.0)).collect(),
            exit_shortage: net_exit.iter().map(|&n| (-n).max(0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entry_stock.len() + self.exit_stock.len() + self.exit_shortage.len()
    }

    pub fn net_exit(&self, j: usize) -> f64 {
        self.exit_stock[j] - self.exit_shortage[j]
    }

    /// Flattened coordinates: entry stocks, exit stocks, exit shortages.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.entry_stock);
        v.extend_from_slice(&self.exit_stock);
        v.extend_from_slice(&self.exit_shortage);
        v
    }

    pub fn from_slice(num_entries: usize, num_exits: usize, v: &[f64]) -> Result<Self> {
        if v.len() != num_entries + 2 * num_exits {
            return Err(Error::structural(format!(
                "state vector has {} coordinates, expected {}",
                v.len(),
                num_entries + 2 * num_exits
            )));
        }
        Ok(SystemState {
            entry_stock: v[..num_entries].to_vec(),
            exit_stock: v[num_entries..num_entries + num_exits].to_vec(),
            exit_shortage: v[num_entries + num_exits..].to_vec(),
        })
    }

    pub fn validate(&self, num_entries: usize, num_exits: usize) -> Result<()> {
        if self.entry_stock.len() != num_entries
            || self.exit_stock.len() != num_exits
            || self.exit_shortage.len() != num_exits
        {
            return Err(Error::structural("state dimensions do not match the hub sets"));
        }
        if self.to_vec().iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::validation("state components must be finite and nonnegative"));
        }
        for j in 0..num_exits {
            if self.exit_stock[j] * self.exit_shortage[j] > STATE_TOL {
                return Err(Error::validation(format!(
                    "exit hub {j} carries both stock and shortage"
                )));
            }
        }
        Ok(())
    }
}

/// TEU moved by one carrier on one lane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub carrier: usize,
    pub lane: Lane,
    pub teu: f64,
}

/// Allocation of volume to carriers for one stage, split into the contract
/// and spot blocks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub contract_moves: Vec<Move>,
    pub spot_moves: Vec<Move>,
}

impl Decision {
    pub fn moves(&self) -> impl Iterator<Item = &Move> {
        self.contract_moves.iter().chain(&self.spot_moves)
    }

    pub fn shipped_from(&self, entry: usize) -> f64 {
        self.moves().filter(|m| m.lane.entry == entry).map(|m| m.teu).sum()
    }

    pub fn shipped_into(&self, exit: usize) -> f64 {
        self.moves().filter(|m| m.lane.exit == exit).map(|m| m.teu).sum()
    }

    pub fn total_teu(&self) -> f64 {
        self.moves().map(|m| m.teu).sum()
    }

    /// Multiplies every move by `factor`.
    pub fn scaled(&self, factor: f64) -> Decision {
        let scale = |v: &Vec<Move>| v.iter().map(|m| Move { teu: m.teu * factor, ..*m }).collect();
        Decision { contract_moves: scale(&self.contract_moves), spot_moves: scale(&self.spot_moves) }
    }
}

/// Spot rates per (carrier, lane), lanes in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotRates {
    pub num_exits: usize,
    pub rates: Vec<Vec<f64>>,
}

impl SpotRates {
    pub fn uniform(num_carriers: usize, num_entries: usize, num_exits: usize, rate: f64) -> Self {
        SpotRates { num_exits, rates: vec![vec![rate; num_entries * num_exits]; num_carriers] }
    }

    pub fn get(&self, carrier: usize, lane: Lane) -> Option<f64> {
        self.rates.get(carrier)?.get(lane.index(self.num_exits)).copied()
    }
}

/// One realization of the stage uncertainty: inflows, outflows and spot rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRealization {
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
    pub spot_rate: SpotRates,
}

/// A full-horizon path of realizations, one per stage.
pub type Scenario = Vec<StageRealization>;

/// Inventory and shortage cost of a state.
pub fn holding_cost(state: &SystemState, cost: &CostParams) -> Result<f64> {
    if state.entry_stock.len() != cost.entry_holding.len()
        || state.exit_stock.len() != cost.exit_holding.len()
        || state.exit_shortage.len() != cost.shortage_penalty.len()
    {
        return Err(Error::structural("state and cost coefficient dimensions differ"));
    }
    let entry: f64 = state.entry_stock.iter().zip(&cost.entry_holding).map(|(s, g)| s * g).sum();
    let exit: f64 = (0..state.exit_stock.len())
        .map(|j| cost.exit_holding[j] * state.exit_stock[j] + cost.shortage_penalty[j] * state.exit_shortage[j])
        .sum();
    Ok(entry + exit)
}

/// Contract plus spot transportation cost of a decision.
pub fn transport_cost(decision: &Decision, carriers: &[Carrier], spot_rates: &SpotRates) -> Result<f64> {
    let mut total = 0.0;
    for m in &decision.contract_moves {
        let carrier = carriers
            .get(m.carrier)
            .ok_or_else(|| Error::structural(format!("unknown carrier {}", m.carrier)))?;
        let rate = carrier.contract_rate(m.lane).ok_or_else(|| {
            Error::structural(format!(
                "carrier {} has no contract on lane ({}, {})",
                carrier.id, m.lane.entry, m.lane.exit
            ))
        })?;
        total += rate * m.teu;
    }
    for m in &decision.spot_moves {
        let rate = spot_rates.get(m.carrier, m.lane).ok_or_else(|| {
            Error::structural(format!(
                "no spot rate for carrier {} on lane ({}, {})",
                m.carrier, m.lane.entry, m.lane.exit
            ))
        })?;
        total += rate * m.teu;
    }
    Ok(total)
}

/// Applies a decision and a realization to a state.
///
/// Entry stock evolves as `stock + inflow - shipped`; the net exit position
/// as `net + received - outflow`, split canonically into stock and shortage.
pub fn state_transition(
    state: &SystemState,
    decision: &Decision,
    realization: &StageRealization,
) -> Result<SystemState> {
    let (ni, nj) = (state.entry_stock.len(), state.exit_stock.len());
    if realization.inflow.len() != ni || realization.outflow.len() != nj {
        return Err(Error::structural("realization dimensions do not match the state"));
    }
    if let Some(m) = decision.moves().find(|m| m.lane.entry >= ni || m.lane.exit >= nj) {
        return Err(Error::structural(format!("move on unknown lane ({}, {})", m.lane.entry, m.lane.exit)));
    }
    let mut entry = vec![0.0; ni];
    for (i, e) in entry.iter_mut().enumerate() {
        let next = state.entry_stock[i] + realization.inflow[i] - decision.shipped_from(i);
        if next < -STATE_TOL {
            return Err(Error::Infeasible(format!(
                "entry hub {i} ships more than it holds (stock would be {next})"
            )));
        }
        *e = next.max(0.0);
    }
    let net: Vec<f64> = (0..nj)
        .map(|j| state.net_exit(j) + decision.shipped_into(j) - realization.outflow[j])
        .collect();
    Ok(SystemState::from_net(entry, &net))
}
