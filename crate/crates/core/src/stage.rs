// SPDX-License-Identifier: Apache-2.0

//! Stage subproblems: immediate holding and transport cost plus a
//! cut-approximated cost-to-go, built as a linear program.
//!
//! Holding cost is charged on the outgoing state of every stage. The
//! holding cost of the initial state does not depend on any decision and is
//! added once by the callers that report full-horizon totals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Sense};
use crate::model::{Decision, Instance, Lane, Move, StageRealization, SystemState};

/// Affine lower bound on the expected cost-to-go after a stage:
/// `theta >= intercept + gradient . outgoing_state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cut {
    pub stage: usize,
    pub intercept: f64,
    pub gradient: Vec<f64>,
}

impl Cut {
    pub fn value_at(&self, state: &[f64]) -> f64 {
        self.intercept + self.gradient.iter().zip(state).map(|(g, s)| g * s).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct StageResult {
    pub decision: Decision,
    pub outgoing_state: SystemState,
    /// Holding cost of the outgoing state plus transport cost.
    pub stage_cost: f64,
    /// Stage cost plus the value of the cost-to-go variable.
    pub total_cost: f64,
    /// Sensitivity of `total_cost` to each incoming state coordinate.
    pub state_duals: Vec<f64>,
    pub pivots: usize,
}

/// Where the incoming state of a stage block comes from.
#[derive(Clone, Copy)]
pub enum Incoming<'a> {
    /// Known data, placed in the right-hand sides.
    Fixed(&'a SystemState),
    /// The outgoing state columns of a preceding block in the same program.
    Linked(&'a StageLayout),
}

/// Column and row positions of one stage block inside a program.
#[derive(Clone, Debug)]
pub struct StageLayout {
    pub stage: usize,
    pub contract: Vec<(usize, Lane, usize)>,
    pub spot: Vec<(usize, Lane, usize)>,
    pub out_entry: Vec<usize>,
    pub out_stock: Vec<usize>,
    pub out_shortage: Vec<usize>,
    pub theta: Option<usize>,
    pub availability_rows: Vec<usize>,
    pub exit_storage_rows: Vec<usize>,
    pub entry_balance_rows: Vec<usize>,
    pub exit_balance_rows: Vec<usize>,
    pub contract_capacity_rows: Vec<Option<usize>>,
    pub spot_capacity_rows: Vec<usize>,
    pub cut_rows: Vec<usize>,
}

impl StageLayout {
    /// Outgoing state columns in cut order: entry, exit stock, exit shortage.
    pub fn out_state_cols(&self) -> impl Iterator<Item = usize> + '_ {
        self.out_entry.iter().chain(&self.out_stock).chain(&self.out_shortage).copied()
    }

    pub fn decision(&self, x: &[f64]) -> Decision {
        let pick = |v: &[(usize, Lane, usize)]| {
            v.iter()
                .filter(|&&(_, _, c)| x[c] > 1e-12)
                .map(|&(carrier, lane, c)| Move { carrier, lane, teu: x[c] })
                .collect()
        };
        Decision { contract_moves: pick(&self.contract), spot_moves: pick(&self.spot) }
    }

    /// Outgoing state, with the exit position split canonically.
    pub fn outgoing_state(&self, x: &[f64]) -> SystemState {
        let entry = self.out_entry.iter().map(|&c| x[c].max(0.0)).collect();
        let net: Vec<f64> = self.out_stock.iter().zip(&self.out_shortage).map(|(&p, &m)| x[p] - x[m]).collect();
        SystemState::from_net(entry, &net)
    }
}

/// Appends the variables and constraints of stage `t` to `lp`.
///
/// When `with_theta` is set a cost-to-go column is added and each cut
/// becomes a row `theta - g . s_out >= intercept`.
pub fn append_stage_block(
    lp: &mut LinearProgram,
    instance: &Instance,
    t: usize,
    incoming: Incoming<'_>,
    realization: &StageRealization,
    cuts: &[Cut],
    with_theta: bool,
) -> Result<StageLayout> {
    if t >= instance.horizon {
        return Err(Error::structural(format!("stage {t} outside horizon {}", instance.horizon)));
    }
    instance.check_realization(realization)?;
    let (ni, nj) = (instance.num_entries(), instance.num_exits());
    let dim = instance.state_dim();
    if let Some(c) = cuts.iter().find(|c| c.gradient.len() != dim) {
        return Err(Error::structural(format!(
            "cut gradient has {} coordinates but the state layout has {dim}",
            c.gradient.len()
        )));
    }
    if let Some(c) = cuts.iter().find(|c| c.stage != t) {
        return Err(Error::structural(format!("cut for stage {} passed to stage {t}", c.stage)));
    }
    if let Incoming::Fixed(s) = incoming {
        s.validate(ni, nj).map_err(|e| e.context("incoming state"))?;
    }
    let cost = &instance.cost;

    let mut contract = Vec::new();
    for (k, c) in instance.carriers.iter().enumerate() {
        for cl in &c.contract_lanes {
            let col = lp.add_nonneg(format!("t{t}_c{k}_{}_{}", cl.lane.entry, cl.lane.exit), cl.rate);
            contract.push((k, cl.lane, col));
        }
    }
    let mut spot = Vec::new();
    for k in 0..instance.num_carriers() {
        for lane in instance.lanes() {
            let rate = realization.spot_rate.get(k, lane).expect("checked above");
            let col = lp.add_nonneg(format!("t{t}_s{k}_{}_{}", lane.entry, lane.exit), rate);
            spot.push((k, lane, col));
        }
    }
    let out_entry: Vec<usize> = (0..ni)
        .map(|i| lp.add_var(format!("t{t}_entry{i}"), cost.entry_holding[i], 0.0, instance.entry_capacity[i]))
        .collect();
    let out_stock: Vec<usize> = (0..nj)
        .map(|j| lp.add_nonneg(format!("t{t}_stock{j}"), cost.exit_holding[j]))
        .collect();
    let out_shortage: Vec<usize> = (0..nj)
        .map(|j| {
            let cap = instance.shortage_limit.as_ref().map_or(f64::INFINITY, |l| l[j]);
            lp.add_var(format!("t{t}_short{j}"), cost.shortage_penalty[j], 0.0, cap)
        })
        .collect();
    let theta = with_theta.then(|| lp.add_nonneg(format!("t{t}_theta"), 1.0));

    let moves = || contract.iter().chain(spot.iter());

    let mut contract_capacity_rows = Vec::new();
    let mut spot_capacity_rows = Vec::new();
    for (k, c) in instance.carriers.iter().enumerate() {
        let coeffs: Vec<(usize, f64)> = contract.iter().filter(|m| m.0 == k).map(|m| (m.2, 1.0)).collect();
        contract_capacity_rows.push(if coeffs.is_empty() {
            None
        } else {
            Some(lp.add_row(format!("t{t}_ccap{k}"), coeffs, Sense::Le, c.contract_capacity[t]))
        });
        let coeffs = spot.iter().filter(|m| m.0 == k).map(|m| (m.2, 1.0)).collect();
        spot_capacity_rows.push(lp.add_row(format!("t{t}_scap{k}"), coeffs, Sense::Le, c.spot_capacity[t]));
    }

    let from = |i: usize| -> Vec<(usize, f64)> { moves().filter(|m| m.1.entry == i).map(|m| (m.2, 1.0)).collect() };
    let into = |j: usize| -> Vec<(usize, f64)> { moves().filter(|m| m.1.exit == j).map(|m| (m.2, 1.0)).collect() };

    let mut availability_rows = Vec::with_capacity(ni);
    let mut entry_balance_rows = Vec::with_capacity(ni);
    for i in 0..ni {
        let q = realization.inflow[i];
        let mut avail = from(i);
        let mut bal = from(i);
        bal.push((out_entry[i], 1.0));
        let rhs = match incoming {
            Incoming::Fixed(s) => s.entry_stock[i] + q,
            Incoming::Linked(prev) => {
                avail.push((prev.out_entry[i], -1.0));
                bal.push((prev.out_entry[i], -1.0));
                q
            }
        };
        availability_rows.push(lp.add_row(format!("t{t}_avail{i}"), avail, Sense::Le, rhs));
        entry_balance_rows.push(lp.add_row(format!("t{t}_ebal{i}"), bal, Sense::Eq, rhs));
    }

    let mut exit_storage_rows = Vec::with_capacity(nj);
    let mut exit_balance_rows = Vec::with_capacity(nj);
    for j in 0..nj {
        let d = realization.outflow[j];
        let mut store = into(j);
        let mut bal = into(j);
        bal.push((out_stock[j], -1.0));
        bal.push((out_shortage[j], 1.0));
        let (store_rhs, bal_rhs) = match incoming {
            Incoming::Fixed(s) => (instance.exit_capacity[j] - s.exit_stock[j], d - s.exit_stock[j] + s.exit_shortage[j]),
            Incoming::Linked(prev) => {
                store.push((prev.out_stock[j], 1.0));
                bal.push((prev.out_stock[j], 1.0));
                bal.push((prev.out_shortage[j], -1.0));
                (instance.exit_capacity[j], d)
            }
        };
        exit_storage_rows.push(lp.add_row(format!("t{t}_store{j}"), store, Sense::Le, store_rhs));
        exit_balance_rows.push(lp.add_row(format!("t{t}_xbal{j}"), bal, Sense::Eq, bal_rhs));
    }

    let mut cut_rows = Vec::with_capacity(cuts.len());
    if let Some(theta) = theta {
        let state_cols: Vec<usize> = out_entry.iter().chain(&out_stock).chain(&out_shortage).copied().collect();
        for (c, cut) in cuts.iter().enumerate() {
            let mut coeffs = vec![(theta, 1.0)];
            coeffs.extend(state_cols.iter().zip(&cut.gradient).filter(|(_, g)| **g != 0.0).map(|(&col, g)| (col, -g)));
            cut_rows.push(lp.add_row(format!("t{t}_cut{c}"), coeffs, Sense::Ge, cut.intercept));
        }
    } else if !cuts.is_empty() {
        return Err(Error::structural("cuts supplied to a block without a cost-to-go column"));
    }

    Ok(StageLayout {
        stage: t,
        contract,
        spot,
        out_entry,
        out_stock,
        out_shortage,
        theta,
        availability_rows,
        exit_storage_rows,
        entry_balance_rows,
        exit_balance_rows,
        contract_capacity_rows,
        spot_capacity_rows,
        cut_rows,
    })
}

/// Builds the stage-`t` subproblem for a known incoming state.
pub fn build_stage_subproblem(
    instance: &Instance,
    t: usize,
    incoming: &SystemState,
    realization: &StageRealization,
    cuts: &[Cut],
) -> Result<(LinearProgram, StageLayout)> {
    let mut lp = LinearProgram::new();
    let layout = append_stage_block(&mut lp, instance, t, Incoming::Fixed(incoming), realization, cuts, true)?;
    Ok((lp, layout))
}

/// Builds and solves the stage-`t` subproblem.
pub fn solve_stage(
    instance: &Instance,
    t: usize,
    incoming: &SystemState,
    realization: &StageRealization,
    cuts: &[Cut],
) -> Result<StageResult> {
    let (lp, layout) = build_stage_subproblem(instance, t, incoming, realization, cuts)?;
    let sol = solve_lp(&lp).map_err(|e| e.context(format!("stage {t}")))?;
    match sol.status {
        LpStatus::Optimal => Ok(extract(instance, &layout, &sol)),
        LpStatus::Infeasible => Err(Error::Infeasible(format!(
            "stage {t}: {}",
            diagnose_infeasibility(instance, t, incoming, realization)
        ))),
        LpStatus::Unbounded => Err(Error::Solver(format!("stage {t} subproblem is unbounded"))),
    }
}

fn extract(instance: &Instance, layout: &StageLayout, sol: &LpSolution) -> StageResult {
    let x = &sol.primal;
    let y = &sol.duals;
    let (ni, nj) = (instance.num_entries(), instance.num_exits());
    let mut state_duals = Vec::with_capacity(ni + 2 * nj);
    for i in 0..ni {
        state_duals.push(y[layout.availability_rows[i]] + y[layout.entry_balance_rows[i]]);
    }
    for j in 0..nj {
        state_duals.push(-y[layout.exit_storage_rows[j]] - y[layout.exit_balance_rows[j]]);
    }
    for j in 0..nj {
        state_duals.push(y[layout.exit_balance_rows[j]]);
    }
    let theta = layout.theta.map_or(0.0, |c| x[c]);
    StageResult {
        decision: layout.decision(x),
        outgoing_state: layout.outgoing_state(x),
        stage_cost: sol.objective - theta,
        total_cost: sol.objective,
        state_duals,
        pivots: sol.pivots,
    }
}

/// Names the hub that most likely makes a stage infeasible.
fn diagnose_infeasibility(instance: &Instance, t: usize, incoming: &SystemState, r: &StageRealization) -> String {
    for i in 0..instance.num_entries() {
        let outbound: f64 = instance
            .carriers
            .iter()
            .map(|c| {
                let contract = if c.contract_lanes.iter().any(|cl| cl.lane.entry == i) { c.contract_capacity[t] } else { 0.0 };
                contract + c.spot_capacity[t]
            })
            .sum();
        let excess = incoming.entry_stock[i] + r.inflow[i] - outbound - instance.entry_capacity[i];
        if excess > 0.0 {
            return format!(
                "entry hub {} overflows its capacity by at least {excess} TEU",
                instance.entry_hubs[i]
            );
        }
    }
    "no feasible allocation (check entry and exit capacities against carrier capacity)".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Carrier, ContractLane, CostParams, SpotRates};

    /// One entry, one exit, one carrier with a contract on the single lane.
    pub(crate) fn one_lane(contract_cap: f64) -> Instance {
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

    fn flows(inflow: f64, outflow: f64, spot: f64) -> StageRealization {
        StageRealization { inflow: vec![inflow], outflow: vec![outflow], spot_rate: SpotRates::uniform(1, 1, 1, spot) }
    }

    /// Stage cost when shipping `q` TEU, filling the contract block first.
    fn grid_cost(q: f64, contract_cap: f64) -> f64 {
        let contract = q.min(contract_cap);
        let spot = q - contract;
        let entry = 20.0 - q;
        let net = q - 15.0;
        5.0 * contract + 8.0 * spot + 20.0 * entry + 10.0 * net.max(0.0) + 30.0 * (-net).max(0.0)
    }

    fn grid_optimum(contract_cap: f64) -> f64 {
        (0..=2000).map(|s| grid_cost(s as f64 / 100.0, contract_cap)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn variable_counts() {
        let inst = one_lane(10.0);
        let (lp, _) = build_stage_subproblem(&inst, 0, &SystemState::zeros(1, 1), &flows(0.0, 0.0, 8.0), &[]).unwrap();
        assert_eq!(lp.num_vars(), 6);
        let rows = lp.num_rows();
        let cuts: Vec<Cut> = (0..5).map(|c| Cut { stage: 0, intercept: c as f64, gradient: vec![1.0, 0.0, 2.0] }).collect();
        let (lp, _) = build_stage_subproblem(&inst, 0, &SystemState::zeros(1, 1), &flows(0.0, 0.0, 8.0), &cuts).unwrap();
        assert_eq!(lp.num_rows(), rows + 5);
    }

    #[test]
    fn empty_system_costs_nothing() {
        let res = solve_stage(&one_lane(10.0), 0, &SystemState::zeros(1, 1), &flows(0.0, 0.0, 8.0), &[]).unwrap();
        assert_eq!(res.total_cost, 0.0);
        assert_eq!(res.decision.total_teu(), 0.0);
    }

    #[test]
    fn single_lane_matches_grid_oracle() {
        let oracle = grid_optimum(10.0);
        assert_eq!(oracle, 180.0);
        let res = solve_stage(&one_lane(10.0), 0, &SystemState::zeros(1, 1), &flows(20.0, 15.0, 8.0), &[]).unwrap();
        assert!((res.total_cost - oracle).abs() < 1e-9);
        assert_eq!(res.total_cost, res.stage_cost);
        assert!((res.decision.total_teu() - 20.0).abs() < 1e-9);
        assert!((res.outgoing_state.exit_stock[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn contract_capacity_dual_matches_finite_difference() {
        let inst = one_lane(10.0);
        let (lp, layout) =
            build_stage_subproblem(&inst, 0, &SystemState::zeros(1, 1), &flows(20.0, 15.0, 8.0), &[]).unwrap();
        let sol = solve_lp(&lp).unwrap();
        let dual = sol.duals[layout.contract_capacity_rows[0].unwrap()];
        let fd = grid_optimum(11.0) - grid_optimum(10.0);
        assert!((fd + 3.0).abs() < 1e-9);
        assert!((dual - fd).abs() < 1e-9);
    }

    #[test]
    fn rejects_mismatched_cut() {
        let inst = one_lane(10.0);
        let cut = Cut { stage: 0, intercept: 0.0, gradient: vec![1.0] };
        let err = build_stage_subproblem(&inst, 0, &SystemState::zeros(1, 1), &flows(0.0, 0.0, 1.0), &[cut]).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn overflow_names_the_hub() {
        let mut inst = one_lane(10.0);
        inst.entry_capacity = vec![5.0];
        let err = solve_stage(&inst, 0, &SystemState::zeros(1, 1), &flows(100.0, 0.0, 1.0), &[]).unwrap_err();
        match err {
            Error::Infeasible(msg) => assert!(msg.contains("E0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn state_duals_match_perturbation() {
        let inst = one_lane(10.0);
        let cuts = vec![Cut { stage: 0, intercept: 3.0, gradient: vec![12.0, 4.0, 25.0] }];
        let r = flows(17.0, 23.0, 6.5);
        let states = [
            SystemState { entry_stock: vec![13.0], exit_stock: vec![7.0], exit_shortage: vec![0.0] },
            SystemState { entry_stock: vec![31.0], exit_stock: vec![0.0], exit_shortage: vec![4.0] },
        ];
        for s in &states {
            let base = solve_stage(&inst, 0, s, &r, &cuts).unwrap();
            let mut v = s.to_vec();
            for c in 0..v.len() {
                // Keep exit stock and shortage complementary.
                if (c == 1 && v[2] > 0.0) || (c == 2 && v[1] > 0.0) {
                    continue;
                }
                let eps = 1e-4;
                v[c] += eps;
                let ps = SystemState::from_slice(1, 1, &v).unwrap();
                v[c] -= eps;
                let pert = solve_stage(&inst, 0, &ps, &r, &cuts).unwrap();
                let fd = pert.total_cost - base.total_cost;
                assert!((fd - base.state_duals[c] * eps).abs() < 1e-3, "coordinate {c}: {fd} vs {}", base.state_duals[c] * eps);
            }
        }
    }

    #[test]
    fn more_capacity_never_costs_more() {
        let r = flows(40.0, 30.0, 7.0);
        let s = SystemState { entry_stock: vec![10.0], exit_stock: vec![0.0], exit_shortage: vec![5.0] };
        let mut prev = f64::INFINITY;
        for cap in [0.0, 5.0, 10.0, 20.0, 40.0] {
            let v = solve_stage(&one_lane(cap), 0, &s, &r, &[]).unwrap().total_cost;
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }
}
