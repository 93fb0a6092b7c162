// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use drayage_core::scenario::{ScenarioLattice, RandomStream};
use drayage_core::{Carrier, ContractLane, CostParams, Instance, Lane, SpotRates, StageRealization, SystemState};
use rand::Rng;

/// 2x2 hubs, two carriers with overlapping contract lanes.
pub fn tiny_instance(horizon: usize) -> Instance {
    let cl = |e, x, rate| ContractLane { lane: Lane::new(e, x), rate };
    Instance {
        entry_hubs: vec!["E0".into(), "E1".into()],
        exit_hubs: vec!["X0".into(), "X1".into()],
        horizon,
        carriers: vec![
            Carrier {
                id: "K0".into(),
                contract_lanes: vec![cl(0, 0, 7.0), cl(1, 1, 8.0)],
                contract_capacity: vec![20.0; horizon],
                spot_capacity: vec![10.0; horizon],
            },
            Carrier {
                id: "K1".into(),
                contract_lanes: vec![cl(0, 0, 8.5), cl(0, 1, 9.0), cl(1, 0, 7.5)],
                contract_capacity: vec![15.0; horizon],
                spot_capacity: vec![10.0; horizon],
            },
        ],
        cost: CostParams {
            entry_holding: vec![20.0, 20.0],
            exit_holding: vec![10.0, 10.0],
            shortage_penalty: vec![30.0, 30.0],
        },
        entry_capacity: vec![100.0, 100.0],
        exit_capacity: vec![60.0, 60.0],
        shortage_limit: None,
        initial_state: SystemState { entry_stock: vec![10.0, 0.0], exit_stock: vec![5.0, 0.0], exit_shortage: vec![0.0, 3.0] },
    }
}

pub fn one_lane(contract_cap: f64) -> Instance {
    Instance {
        entry_hubs: vec!["E0".into()],
        exit_hubs: vec!["X0".into()],
        horizon: 1,
        carriers: vec![Carrier {
            id: "k0".into(),
            contract_lanes: vec![ContractLane { lane: Lane::new(0, 0), rate: 5.0 }],
            contract_capacity: vec![contract_cap],
            spot_capacity: vec![40.0],
        }],
        cost: CostParams { entry_holding: vec![20.0], exit_holding: vec![10.0], shortage_penalty: vec![30.0] },
        entry_capacity: vec![100.0],
        exit_capacity: vec![100.0],
        shortage_limit: None,
        initial_state: SystemState::zeros(1, 1),
    }
}

/// Flows on {10, 15, ..., 30}, spot rates uniform on [3.5, 8].
pub fn random_realization(instance: &Instance, stream: &RandomStream) -> StageRealization {
    let mut rng = stream.rng();
    let mut flow = || 10.0 + 5.0 * rng.random_range(0..5) as f64;
    let inflow = (0..instance.num_entries()).map(|_| flow()).collect();
    let outflow = (0..instance.num_exits()).map(|_| flow()).collect();
    let mut rng = stream.child("spot").rng();
    let rates = (0..instance.num_carriers())
        .map(|_| (0..instance.num_lanes()).map(|_| rng.random_range(3.5..=8.0)).collect())
        .collect();
    StageRealization { inflow, outflow, spot_rate: SpotRates { num_exits: instance.num_exits(), rates } }
}

pub fn random_lattice(instance: &Instance, per_stage: usize, seed: u64) -> ScenarioLattice {
    let s = RandomStream::new(seed);
    ScenarioLattice::equiprobable(
        (0..instance.horizon)
            .map(|t| (0..per_stage).map(|r| random_realization(instance, &s.child(t).child(r))).collect())
            .collect(),
    )
}

/// Deterministic-equivalent optimum over the whole lattice tree, including
/// the initial holding cost. Built from stage blocks with probability-weighted
/// objective coefficients.
pub fn tree_optimum(instance: &Instance, lattice: &ScenarioLattice) -> f64 {
    use drayage_core::lp::{solve_lp, LinearProgram, LpStatus};
    use drayage_core::stage::{append_stage_block, Incoming, StageLayout};

    fn grow(
        lp: &mut LinearProgram,
        instance: &Instance,
        lattice: &ScenarioLattice,
        t: usize,
        parent: Option<&StageLayout>,
        prob: f64,
    ) {
        if t == lattice.horizon() {
            return;
        }
        for node in &lattice.stages[t] {
            let start = lp.num_vars();
            let incoming = match parent {
                Some(p) => Incoming::Linked(p),
                None => Incoming::Fixed(&instance.initial_state),
            };
            let layout = append_stage_block(lp, instance, t, incoming, &node.realization, &[], false).unwrap();
            let p = prob * node.probability;
            for c in &mut lp.objective[start..] {
                *c *= p;
            }
            grow(lp, instance, lattice, t + 1, Some(&layout), p);
        }
    }

    let mut lp = LinearProgram::new();
    grow(&mut lp, instance, lattice, 0, None, 1.0);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective + drayage_core::holding_cost(&instance.initial_state, &instance.cost).unwrap()
}
