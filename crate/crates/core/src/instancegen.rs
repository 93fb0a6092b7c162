// SPDX-License-Identifier: Apache-2.0

//! Reproducible instance generators: the 2x2 small network and the bid-pool
//! practical network, each bundled with a nominal scenario and the flow model
//! used for training lattices and out-of-sample simulation.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::wait_and_see_cost;
use crate::model::{Carrier, ContractLane, CostParams, Instance, Lane, Scenario, SpotRates, StageRealization, SystemState};
use crate::scenario::{sample_spot_rates, CopulaSpec, FlowModel, IntensityModel, RandomStream};

/// Attempts at drawing an instance before giving up on recourse.
const MAX_ATTEMPTS: usize = 25;
/// Attempts at drawing a carrier's bids before failing.
const MAX_BID_DRAWS: usize = 100;

/// An instance with the data needed to train and evaluate on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub instance: Instance,
    /// Deterministic reference path sampled with the instance.
    pub nominal: Scenario,
    pub flow_model: FlowModel,
    /// Range the per-stage flows are expected to stay in; used for
    /// recourse validation and sensitivity sampling.
    pub flow_bounds: (f64, f64),
    pub recourse: RecourseCheck,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        self.flow_model.validate(&self.instance)?;
        if self.nominal.len() != self.instance.horizon {
            return Err(Error::validation("nominal scenario length differs from the horizon"));
        }
        for (t, r) in self.nominal.iter().enumerate() {
            self.instance.check_realization(r).map_err(|e| e.context(format!("nominal stage {t}")))?;
        }
        let (lo, hi) = self.flow_bounds;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::validation(format!("flow_bounds [{lo}, {hi}] must be ordered and nonnegative")));
        }
        Ok(())
    }
}

/// Outcome of the relatively-complete-recourse validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecourseCheck {
    /// Maximal inflow fits entry capacity plus outbound carrier capacity at
    /// every hub and stage.
    pub per_stage: bool,
    /// The full horizon stays feasible with every inflow at its maximum and
    /// every outflow at its minimum.
    pub worst_case: bool,
    pub nominal_feasible: bool,
}

impl RecourseCheck {
    pub fn ok(&self) -> bool {
        self.per_stage && self.worst_case && self.nominal_feasible
    }
}

/// Validates recourse with flows confined to `flow_bounds`.
///
/// Shortage is unbounded unless a shortage limit is set, so only entry
/// overflow can make a stage infeasible. Larger inflows and smaller outflows
/// only tighten the entry side, hence the worst-case path covers every path
/// within the bounds.
pub fn check_recourse(instance: &Instance, nominal: &Scenario, flow_bounds: (f64, f64)) -> Result<RecourseCheck> {
    let (lo, hi) = flow_bounds;
    let mut per_stage = true;
    for t in 0..instance.horizon {
        for i in 0..instance.num_entries() {
            let outbound: f64 = instance
                .carriers
                .iter()
                .map(|c| {
                    let contract = if c.contract_lanes.iter().any(|cl| cl.lane.entry == i) { c.contract_capacity[t] } else { 0.0 };
                    contract + c.spot_capacity[t]
                })
                .sum();
            if hi > instance.entry_capacity[i] + outbound {
                per_stage = false;
            }
        }
    }
    let feasible = |s: &Scenario| match wait_and_see_cost(instance, s) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible(_)) => Ok(false),
        Err(e) => Err(e),
    };
    let worst: Scenario = nominal
        .iter()
        .map(|r| StageRealization {
            inflow: vec![hi; r.inflow.len()],
            outflow: vec![lo; r.outflow.len()],
            spot_rate: r.spot_rate.clone(),
        })
        .collect();
    Ok(RecourseCheck { per_stage, worst_case: feasible(&worst)?, nominal_feasible: feasible(nominal)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallSpec {
    pub horizon: usize,
    /// Spot capacity per carrier and period, TEU.
    pub spot_capacity: f64,
    /// Poisson intensity of every flow in the stochastic model.
    pub intensity: f64,
}

impl Default for SmallSpec {
    fn default() -> Self {
        SmallSpec { horizon: 12, spot_capacity: 5.0, intensity: 20.0 }
    }
}

fn rates(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, options: &[T]) -> T {
    options[rng.random_range(0..options.len())]
}

/// The 2x2 network with two carriers contracted on all four lanes.
pub fn gen_small_instance(stream: &RandomStream) -> Result<Problem> {
    gen_small_with(&SmallSpec::default(), stream)
}

pub fn gen_small_with(spec: &SmallSpec, stream: &RandomStream) -> Result<Problem> {
    if spec.horizon == 0 || !(spec.spot_capacity >= 0.0) || !(spec.intensity > 0.0) {
        return Err(Error::validation("small instance needs a positive horizon and intensity"));
    }
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let p = draw_small(spec, &stream.child("small").child(attempt))?;
        if p.recourse.nominal_feasible {
            return Ok(p);
        }
        last = Some(p);
    }
    // Every draw overflowed an entry hub on its own nominal path.
    last.ok_or_else(|| Error::validation("no attempts made"))
}

fn draw_small(spec: &SmallSpec, stream: &RandomStream) -> Result<Problem> {
    let tau = spec.horizon;
    let mut rng = stream.child("carriers").rng();
    let lanes: Vec<Lane> = (0..2).flat_map(|i| (0..2).map(move |j| Lane::new(i, j))).collect();
    let carriers = (0..2)
        .map(|k| Carrier {
            id: format!("K{k}"),
            contract_lanes: lanes.iter().map(|&lane| ContractLane { lane, rate: rates(&mut rng, 7.0, 9.9) }).collect(),
            contract_capacity: (0..tau).map(|_| pick(&mut rng, &[10.0, 15.0, 20.0])).collect(),
            spot_capacity: vec![spec.spot_capacity; tau],
        })
        .collect();
    let instance = Instance {
        entry_hubs: vec!["E0".into(), "E1".into()],
        exit_hubs: vec!["X0".into(), "X1".into()],
        horizon: tau,
        carriers,
        cost: CostParams {
            entry_holding: vec![20.0; 2],
            exit_holding: vec![10.0; 2],
            shortage_penalty: vec![30.0; 2],
        },
        entry_capacity: vec![100.0; 2],
        exit_capacity: vec![100.0; 2],
        shortage_limit: None,
        initial_state: SystemState::zeros(2, 2),
    };
    let flows = [10.0, 15.0, 20.0, 25.0, 30.0];
    let mut rng = stream.child("nominal").rng();
    let nominal: Scenario = (0..tau)
        .map(|_| {
            let inflow = (0..2).map(|_| pick(&mut rng, &flows)).collect();
            let outflow = (0..2).map(|_| pick(&mut rng, &flows)).collect();
            let spot_rate = sample_spot_rates(&instance, &mut rng, 3.5, 8.0);
            StageRealization { inflow, outflow, spot_rate }
        })
        .collect();
    let flow_model = FlowModel {
        intensity: IntensityModel::constant(4, spec.intensity),
        copula: CopulaSpec::identity(4),
        spot_bounds: (3.5, 8.0),
    };
    let flow_bounds = (10.0, 30.0);
    let recourse = check_recourse(&instance, &nominal, flow_bounds)?;
    Ok(Problem { instance, nominal, flow_model, flow_bounds, recourse })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PracticalSpec {
    pub periods: usize,
    pub entry_hubs: usize,
    pub exit_hubs: usize,
    pub carriers: usize,
    pub bid_pool: usize,
    pub bids_per_carrier: (usize, usize),
    pub lanes_per_bid: (usize, usize),
    pub initial_entry_stock: (f64, f64),
    pub initial_exit_stock: (f64, f64),
    pub hub_capacity: f64,
    pub contract_capacity: (f64, f64),
    pub spot_buffer: f64,
    pub entry_holding: f64,
    pub exit_holding: f64,
    pub shortage_penalty: f64,
    pub contract_rate: (f64, f64),
    pub spot_rate: (f64, f64),
    /// Range of nominal flows; also the inflow range for sensitivity runs.
    pub flow: (f64, f64),
    /// Constant Poisson intensity of every flow in the stochastic model.
    pub intensity: f64,
    /// Common off-diagonal correlation of the flow copula.
    pub flow_correlation: f64,
}

impl Default for PracticalSpec {
    fn default() -> Self {
        PracticalSpec {
            periods: 12,
            entry_hubs: 6,
            exit_hubs: 6,
            carriers: 20,
            bid_pool: 10,
            bids_per_carrier: (1, 2),
            lanes_per_bid: (6, 18),
            initial_entry_stock: (0.0, 500.0),
            initial_exit_stock: (0.0, 1000.0),
            hub_capacity: 10_000.0,
            contract_capacity: (400.0, 800.0),
            spot_buffer: 40.0,
            entry_holding: 20.0,
            exit_holding: 10.0,
            shortage_penalty: 30.0,
            contract_rate: (6.0, 8.0),
            spot_rate: (3.0, 9.0),
            flow: (1000.0, 3000.0),
            intensity: 2000.0,
            flow_correlation: 0.0,
        }
    }
}

impl PracticalSpec {
    /// 3x3 hubs and 6 carriers, with flows scaled so supply and carrier
    /// capacity stay in the same proportion as the full-size defaults.
    pub fn downsized() -> Self {
        PracticalSpec {
            entry_hubs: 3,
            exit_hubs: 3,
            carriers: 6,
            bid_pool: 5,
            lanes_per_bid: (2, 6),
            flow: (600.0, 1800.0),
            intensity: 1200.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("periods", self.periods),
            ("entry_hubs", self.entry_hubs),
            ("exit_hubs", self.exit_hubs),
            ("carriers", self.carriers),
            ("bid_pool", self.bid_pool),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::validation(format!("{name} must be positive")));
        }
        let ranges = [
            ("bids_per_carrier", self.bids_per_carrier.0 as f64, self.bids_per_carrier.1 as f64),
            ("lanes_per_bid", self.lanes_per_bid.0 as f64, self.lanes_per_bid.1 as f64),
            ("initial_entry_stock", self.initial_entry_stock.0, self.initial_entry_stock.1),
            ("initial_exit_stock", self.initial_exit_stock.0, self.initial_exit_stock.1),
            ("contract_capacity", self.contract_capacity.0, self.contract_capacity.1),
            ("contract_rate", self.contract_rate.0, self.contract_rate.1),
            ("spot_rate", self.spot_rate.0, self.spot_rate.1),
            ("flow", self.flow.0, self.flow.1),
        ];
        for (name, lo, hi) in ranges {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::validation(format!("{name}: range [{lo}, {hi}] must be ordered and nonnegative")));
            }
        }
        if self.bids_per_carrier.0 == 0 || self.lanes_per_bid.0 == 0 {
            return Err(Error::validation("bids_per_carrier and lanes_per_bid must start at 1 or more"));
        }
        if self.bids_per_carrier.0 > self.bid_pool {
            return Err(Error::validation("bids_per_carrier: minimum exceeds bid_pool"));
        }
        let scalars = [
            ("hub_capacity", self.hub_capacity),
            ("spot_buffer", self.spot_buffer),
            ("entry_holding", self.entry_holding),
            ("exit_holding", self.exit_holding),
            ("shortage_penalty", self.shortage_penalty),
        ];
        if let Some((name, v)) = scalars.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(format!("{name}: {v} must be finite and nonnegative")));
        }
        if self.initial_entry_stock.1 > self.hub_capacity || self.initial_exit_stock.1 > self.hub_capacity {
            return Err(Error::validation("initial stock range exceeds hub_capacity"));
        }
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::validation(format!("intensity: {} must be positive", self.intensity)));
        }
        if !(0.0..1.0).contains(&self.flow_correlation) {
            return Err(Error::validation("flow_correlation must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Bid-pool instance. Draws are retried on fresh substreams while the
/// nominal path or the per-stage check fails. A failed worst-case check is
/// only flagged: with the full-size ranges the maximal inflow on every hub
/// and stage exceeds what the carriers can move over the horizon.
pub fn gen_practical_instance(spec: &PracticalSpec, stream: &RandomStream) -> Result<Problem> {
    spec.validate()?;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let p = draw_practical(spec, &stream.child("practical").child(attempt))?;
        if p.recourse.per_stage && p.recourse.nominal_feasible {
            return Ok(p);
        }
        last = Some(p);
    }
    last.ok_or_else(|| Error::validation("no attempts made"))
}

fn draw_practical(spec: &PracticalSpec, stream: &RandomStream) -> Result<Problem> {
    let (ni, nj, tau) = (spec.entry_hubs, spec.exit_hubs, spec.periods);
    let num_lanes = ni * nj;
    let mut rng = stream.child("bids").rng();
    let bids: Vec<Vec<usize>> = (0..spec.bid_pool)
        .map(|_| {
            let lo = spec.lanes_per_bid.0.min(num_lanes);
            let hi = spec.lanes_per_bid.1.min(num_lanes);
            let size = rng.random_range(lo..=hi);
            let mut lanes = sample(&mut rng, num_lanes, size).into_vec();
            lanes.sort_unstable();
            lanes
        })
        .collect();

    let mut carriers = Vec::with_capacity(spec.carriers);
    for k in 0..spec.carriers {
        let mut rng = stream.child("carrier").child(k).rng();
        let mut lanes = BTreeSet::new();
        for _ in 0..MAX_BID_DRAWS {
            let hi = spec.bids_per_carrier.1.min(spec.bid_pool);
            let won = rng.random_range(spec.bids_per_carrier.0..=hi);
            lanes = sample(&mut rng, spec.bid_pool, won).into_iter().flat_map(|b| bids[b].iter().copied()).collect();
            if !lanes.is_empty() {
                break;
            }
        }
        if lanes.is_empty() {
            return Err(Error::validation(format!("carrier {k} won no contract lanes")));
        }
        let contract_lanes = lanes
            .into_iter()
            .map(|l| ContractLane {
                lane: Lane::new(l / nj, l % nj),
                rate: rates(&mut rng, spec.contract_rate.0, spec.contract_rate.1),
            })
            .collect();
        let cap = rates(&mut rng, spec.contract_capacity.0, spec.contract_capacity.1).round();
        carriers.push(Carrier {
            id: format!("K{k}"),
            contract_lanes,
            contract_capacity: vec![cap; tau],
            spot_capacity: vec![spec.spot_buffer; tau],
        });
    }

    let mut rng = stream.child("initial").rng();
    let entry_stock = (0..ni).map(|_| rates(&mut rng, spec.initial_entry_stock.0, spec.initial_entry_stock.1).round()).collect();
    let exit_stock = (0..nj).map(|_| rates(&mut rng, spec.initial_exit_stock.0, spec.initial_exit_stock.1).round()).collect();
    let instance = Instance {
        entry_hubs: (0..ni).map(|i| format!("E{i}")).collect(),
        exit_hubs: (0..nj).map(|j| format!("X{j}")).collect(),
        horizon: tau,
        carriers,
        cost: CostParams {
            entry_holding: vec![spec.entry_holding; ni],
            exit_holding: vec![spec.exit_holding; nj],
            shortage_penalty: vec![spec.shortage_penalty; nj],
        },
        entry_capacity: vec![spec.hub_capacity; ni],
        exit_capacity: vec![spec.hub_capacity; nj],
        shortage_limit: None,
        initial_state: SystemState { entry_stock, exit_stock, exit_shortage: vec![0.0; nj] },
    };
    instance.validate()?;

    let mut rng = stream.child("nominal").rng();
    let (flo, fhi) = spec.flow;
    let flow = |rng: &mut ChaCha8Rng| if flo == fhi { flo } else { rng.random_range(flo..=fhi).round() };
    let nominal: Scenario = (0..tau)
        .map(|_| {
            let inflow = (0..ni).map(|_| flow(&mut rng)).collect();
            let outflow = (0..nj).map(|_| flow(&mut rng)).collect();
            let spot_rate = sample_spot_rates(&instance, &mut rng, spec.spot_rate.0, spec.spot_rate.1);
            StageRealization { inflow, outflow, spot_rate }
        })
        .collect();
    let dim = ni + nj;
    let flow_model = FlowModel {
        intensity: IntensityModel::constant(dim, spec.intensity),
        copula: CopulaSpec::equicorrelated(dim, spec.flow_correlation),
        spot_bounds: spec.spot_rate,
    };
    let recourse = check_recourse(&instance, &nominal, spec.flow)?;
    Ok(Problem { instance, nominal, flow_model, flow_bounds: spec.flow, recourse })
}

/// A uniform spot table, for hand-built scenarios.
pub fn flat_spot(instance: &Instance, rate: f64) -> SpotRates {
    SpotRates::uniform(instance.num_carriers(), instance.num_entries(), instance.num_exits(), rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_parameters() {
        let p = gen_small_instance(&RandomStream::new(1)).unwrap();
        let inst = &p.instance;
        assert_eq!(inst.cost.entry_holding, vec![20.0, 20.0]);
        assert_eq!(inst.cost.exit_holding, vec![10.0, 10.0]);
        assert_eq!(inst.cost.shortage_penalty, vec![30.0, 30.0]);
        assert_eq!(inst.entry_capacity, vec![100.0; 2]);
        assert_eq!(inst.exit_capacity, vec![100.0; 2]);
        assert_eq!(inst.num_carriers(), 2);
        for c in &inst.carriers {
            assert_eq!(c.contract_lanes.len(), 4);
            assert!(c.contract_lanes.iter().all(|cl| (7.0..=9.9).contains(&cl.rate)));
            assert!(c.contract_capacity.iter().all(|v| [10.0, 15.0, 20.0].contains(v)));
        }
        for r in &p.nominal {
            assert!(r.inflow.iter().chain(&r.outflow).all(|v| [10.0, 15.0, 20.0, 25.0, 30.0].contains(v)));
            assert!(r.spot_rate.rates.iter().flatten().all(|v| (3.5..=8.0).contains(v)));
        }
        assert!(p.recourse.nominal_feasible);
        p.validate().unwrap();
    }

    #[test]
    fn generation_is_pure() {
        let s = RandomStream::new(9);
        assert_eq!(gen_small_instance(&s).unwrap(), gen_small_instance(&s).unwrap());
        let spec = PracticalSpec::downsized();
        assert_eq!(gen_practical_instance(&spec, &s).unwrap(), gen_practical_instance(&spec, &s).unwrap());
        assert_ne!(gen_small_instance(&s).unwrap(), gen_small_instance(&RandomStream::new(10)).unwrap());
    }

    #[test]
    fn downsized_practical_shape() {
        let start = std::time::Instant::now();
        let p = gen_practical_instance(&PracticalSpec::downsized(), &RandomStream::new(3)).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0);
        let inst = &p.instance;
        assert_eq!((inst.num_entries(), inst.num_exits(), inst.num_carriers()), (3, 3, 6));
        assert!(p.recourse.ok());
        for c in &inst.carriers {
            assert!(!c.contract_lanes.is_empty() && c.contract_lanes.len() <= 9);
            assert!(c.spot_capacity.iter().all(|&v| v == 40.0));
            assert!(c.contract_capacity.iter().all(|v| (400.0..=800.0).contains(v)));
            assert!(c.contract_lanes.iter().all(|cl| (6.0..=8.0).contains(&cl.rate)));
        }
        assert!(inst.entry_capacity.iter().chain(&inst.exit_capacity).all(|&v| v == 10_000.0));
        assert!(inst.initial_state.entry_stock.iter().all(|v| (0.0..=500.0).contains(v)));
        assert!(inst.initial_state.exit_stock.iter().all(|v| (0.0..=1000.0).contains(v)));
        assert!(inst.initial_state.exit_shortage.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_size_lane_counts() {
        let p = gen_practical_instance(&PracticalSpec::default(), &RandomStream::new(7)).unwrap();
        let inst = &p.instance;
        assert_eq!((inst.num_entries(), inst.num_exits(), inst.num_carriers()), (6, 6, 20));
        // 1-2 bids of 6-18 lanes each, before removing duplicates.
        assert!(inst.carriers.iter().all(|c| (6..=36).contains(&c.contract_lanes.len())));
    }

    #[test]
    fn invalid_spec_names_field() {
        let spec = PracticalSpec { contract_capacity: (800.0, 400.0), ..Default::default() };
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("contract_capacity"), "{err}");
    }
}
