// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::copula::{CopulaSampler, CopulaSpec};
use super::intensity::{intensity_step, IntensityModel};
use super::poisson::correlated_counts;
use super::RandomStream;
use crate::error::{Error, Result};
use crate::model::{Instance, Scenario, SpotRates, StageRealization};

/// The joint law of inflows, outflows and spot rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowModel {
    pub intensity: IntensityModel,
    pub copula: CopulaSpec,
    /// Spot rates are i.i.d. uniform on `[lo, hi]` per carrier and lane.
    pub spot_bounds: (f64, f64),
}

impl FlowModel {
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let dim = instance.flow_dim();
        if self.intensity.dim() != dim || self.copula.dim() != dim {
            return Err(Error::validation(format!(
                "flow model has {} intensities and a {}-dimensional copula, expected {dim}",
                self.intensity.dim(),
                self.copula.dim()
            )));
        }
        self.intensity.validate(instance.horizon)?;
        self.copula.validate()?;
        let (lo, hi) = self.spot_bounds;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::validation(format!("spot bounds [{lo}, {hi}] must be ordered and nonnegative")));
        }
        Ok(())
    }
}

/// Multivariate Poisson flows for one stage, split into inflows and outflows.
pub fn sample_flows<R: Rng + ?Sized>(
    num_entries: usize,
    intensities: &[f64],
    sampler: &mut CopulaSampler,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_entries > intensities.len() {
        return Err(Error::structural("more entry hubs than flow dimensions"));
    }
    let counts = correlated_counts(intensities, sampler, rng)?;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok((values[..num_entries].to_vec(), values[num_entries..].to_vec()))
}

/// Spot rates drawn i.i.d. uniform on `[lo, hi]` for every carrier and lane.
pub fn sample_spot_rates<R: Rng + ?Sized>(instance: &Instance, rng: &mut R, lo: f64, hi: f64) -> SpotRates {
    let lanes = instance.num_lanes();
    let rates = (0..instance.num_carriers())
        .map(|_| (0..lanes).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect())
        .collect();
    SpotRates { num_exits: instance.num_exits(), rates }
}

fn realization(
    instance: &Instance,
    model: &FlowModel,
    intensities: &[f64],
    sampler: &mut CopulaSampler,
    stream: &RandomStream,
) -> Result<StageRealization> {
    let mut rng = stream.rng();
    let (inflow, outflow) = sample_flows(instance.num_entries(), intensities, sampler, &mut rng)?;
    let mut spot_rng = stream.child("spot").rng();
    let spot_rate = sample_spot_rates(instance, &mut spot_rng, model.spot_bounds.0, model.spot_bounds.1);
    Ok(StageRealization { inflow, outflow, spot_rate })
}

/// Per-stage finite sets of realizations with probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioLattice {
    pub stages: Vec<Vec<LatticeNode>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeNode {
    pub probability: f64,
    pub realization: StageRealization,
}

impl ScenarioLattice {
    /// A single-realization lattice following one path.
    pub fn deterministic(path: &[StageRealization]) -> Self {
        ScenarioLattice {
            stages: path
                .iter()
                .map(|r| vec![LatticeNode { probability: 1.0, realization: r.clone() }])
                .collect(),
        }
    }

    /// Equiprobable nodes per stage.
    pub fn equiprobable(stages: Vec<Vec<StageRealization>>) -> Self {
        ScenarioLattice {
            stages: stages
                .into_iter()
                .map(|v| {
                    let p = 1.0 / v.len() as f64;
                    v.into_iter().map(|realization| LatticeNode { probability: p, realization }).collect()
                })
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.stages.len() != instance.horizon {
            return Err(Error::validation(format!(
                "lattice has {} stages, instance horizon is {}",
                self.stages.len(),
                instance.horizon
            )));
        }
        for (t, nodes) in self.stages.iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::validation(format!("lattice stage {t} is empty")));
            }
            if nodes.iter().any(|n| !(n.probability >= 0.0)) {
                return Err(Error::validation(format!("lattice stage {t} has a negative probability")));
            }
            let total: f64 = nodes.iter().map(|n| n.probability).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!("lattice stage {t} probabilities sum to {total}")));
            }
            for n in nodes {
                instance.check_realization(&n.realization).map_err(|e| e.context(format!("lattice stage {t}")))?;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("lattice serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Number of full paths through the lattice.
    pub fn num_paths(&self) -> usize {
        self.stages.iter().map(|s| s.len()).product()
    }

    /// Every path with its probability, in lexicographic node order.
    pub fn enumerate_paths(&self) -> Vec<(f64, Scenario)> {
        let mut out = vec![(1.0, Vec::new())];
        for nodes in &self.stages {
            let mut next = Vec::with_capacity(out.len() * nodes.len());
            for (p, path) in &out {
                for n in nodes {
                    let mut q: Scenario = path.clone();
                    q.push(n.realization.clone());
                    next.push((p * n.probability, q));
                }
            }
            out = next;
        }
        out
    }
}

/// Samples a stagewise-independent training lattice with `n` equiprobable
/// realizations per stage. Autoregressive intensities are frozen at their
/// per-stage fixed point.
pub fn build_lattice(instance: &Instance, model: &FlowModel, n: usize, stream: &RandomStream) -> Result<ScenarioLattice> {
    if n == 0 {
        return Err(Error::validation("lattice needs at least one realization per stage"));
    }
    model.validate(instance)?;
    let mut sampler = model.copula.sampler()?;
    let mut stages = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let lambda = model.intensity.frozen(t);
        let nodes = (0..n)
            .map(|r| realization(instance, model, &lambda, &mut sampler, &stream.child(format!("stage-{t}")).child(r)))
            .collect::<Result<Vec<_>>>()?;
        stages.push(nodes);
    }
    Ok(ScenarioLattice::equiprobable(stages))
}

/// Samples one full-horizon path from the simulation model, running the
/// intensity recursion on the simulated counts.
pub fn sample_scenario(instance: &Instance, model: &FlowModel, stream: &RandomStream) -> Result<Scenario> {
    model.validate(instance)?;
    let mut sampler = model.copula.sampler()?;
    let dims = model.intensity.dim();
    // Start the recursion at its fixed point.
    let mut lambda = model.intensity.frozen(0);
    let mut prev_count = lambda.clone();
    let mut path = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let next: Vec<f64> = (0..dims)
            .map(|d| intensity_step(lambda[d], prev_count[d], model.intensity.covariates_at(d, t), &model.intensity.dims[d]))
            .collect::<Result<_>>()?;
        lambda = next;
        let r = realization(instance, model, &lambda, &mut sampler, &stream.child(format!("stage-{t}")))?;
        prev_count = r.inflow.iter().chain(&r.outflow).copied().collect();
        path.push(r);
    }
    Ok(path)
}

/// One row of a scenario panel table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PanelRow {
    pub scenario: usize,
    pub stage: usize,
    pub dimension: String,
    pub value: f64,
}

/// Flattens scenarios into (scenario, stage, dimension, value) rows; spot
/// rates are included as `spot:<carrier>:<entry>-><exit>` dimensions.
pub fn panel_rows(instance: &Instance, scenarios: &[Scenario]) -> Vec<PanelRow> {
    let mut rows = Vec::new();
    for (s, path) in scenarios.iter().enumerate() {
        for (t, r) in path.iter().enumerate() {
            for (i, v) in r.inflow.iter().enumerate() {
                rows.push(PanelRow { scenario: s, stage: t, dimension: format!("inflow:{}", instance.entry_hubs[i]), value: *v });
            }
            for (j, v) in r.outflow.iter().enumerate() {
                rows.push(PanelRow { scenario: s, stage: t, dimension: format!("outflow:{}", instance.exit_hubs[j]), value: *v });
            }
            for (k, c) in instance.carriers.iter().enumerate() {
                for lane in instance.lanes() {
                    rows.push(PanelRow {
                        scenario: s,
                        stage: t,
                        dimension: format!(
                            "spot:{}:{}->{}",
                            c.id, instance.entry_hubs[lane.entry], instance.exit_hubs[lane.exit]
                        ),
                        value: r.spot_rate.get(k, lane).unwrap_or(f64::NAN),
                    });
                }
            }
        }
    }
    rows
}
