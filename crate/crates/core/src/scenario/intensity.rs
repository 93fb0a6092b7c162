// SPDX-License-Identifier: Apache-2.0

//! Autoregressive Poisson intensities (INGARCH(1,1) with covariates).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of one flow dimension:
/// `lambda(t) = base + intensity_feedback * lambda(t-1) + count_feedback * count(t-1) + covariate_coefs . z(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityParams {
    pub base: f64,
    #[serde(default)]
    pub intensity_feedback: f64,
    #[serde(default)]
    pub count_feedback: f64,
    #[serde(default)]
    pub covariate_coefs: Vec<f64>,
}

impl IntensityParams {
    pub fn constant(rate: f64) -> Self {
        IntensityParams { base: rate, intensity_feedback: 0.0, count_feedback: 0.0, covariate_coefs: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(Error::validation(format!("intensity base {} must be positive", self.base)));
        }
        if !(self.intensity_feedback >= 0.0 && self.count_feedback >= 0.0) {
            return Err(Error::validation("intensity feedback coefficients must be nonnegative"));
        }
        if self.intensity_feedback + self.count_feedback >= 1.0 {
            return Err(Error::validation("intensity feedback coefficients must sum to less than 1"));
        }
        if self.covariate_coefs.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("covariate coefficients must be finite"));
        }
        Ok(())
    }

    /// Fixed point of the recursion with covariates held at `z`.
    pub fn stationary(&self, z: &[f64]) -> f64 {
        (self.base + dot(&self.covariate_coefs, z)) / (1.0 - self.intensity_feedback - self.count_feedback)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One step of the intensity recursion.
pub fn intensity_step(prev_intensity: f64, prev_count: f64, covariates: &[f64], params: &IntensityParams) -> Result<f64> {
    if !(prev_intensity >= 0.0 && prev_count >= 0.0) {
        return Err(Error::validation("previous intensity and count must be nonnegative"));
    }
    if covariates.len() != params.covariate_coefs.len() {
        return Err(Error::structural(format!(
            "{} covariates supplied for {} coefficients",
            covariates.len(),
            params.covariate_coefs.len()
        )));
    }
    let lambda = params.base
        + params.intensity_feedback * prev_intensity
        + params.count_feedback * prev_count
        + dot(&params.covariate_coefs, covariates);
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("intensity recursion produced non-positive rate {lambda}")));
    }
    Ok(lambda)
}

/// Intensity parameters for every flow dimension (entry hubs, then exit
/// hubs) plus optional covariate series indexed `[dimension][stage]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityModel {
    pub dims: Vec<IntensityParams>,
    #[serde(default)]
    pub covariates: Vec<Vec<Vec<f64>>>,
}

impl IntensityModel {
    pub fn constant(dim: usize, rate: f64) -> Self {
        IntensityModel { dims: vec![IntensityParams::constant(rate); dim], covariates: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        for (d, p) in self.dims.iter().enumerate() {
            p.validate().map_err(|e| e.context(format!("flow dimension {d}")))?;
        }
        if !self.covariates.is_empty() {
            if self.covariates.len() != self.dims.len() {
                return Err(Error::validation("covariate series must be given for every flow dimension"));
            }
            for (d, series) in self.covariates.iter().enumerate() {
                if series.len() < horizon {
                    return Err(Error::validation(format!("covariate series {d} shorter than the horizon")));
                }
                if series.iter().any(|z| z.len() != self.dims[d].covariate_coefs.len()) {
                    return Err(Error::validation(format!("covariate series {d} has the wrong width")));
                }
            }
        } else if self.dims.iter().any(|p| !p.covariate_coefs.is_empty()) {
            return Err(Error::validation("covariate coefficients given without covariate series"));
        }
        Ok(())
    }

    pub fn covariates_at(&self, d: usize, t: usize) -> &[f64] {
        self.covariates.get(d).and_then(|s| s.get(t)).map_or(&[], |z| z.as_slice())
    }

    /// Stage-`t` intensity with feedback frozen at its fixed point. Used for
    /// stagewise-independent training lattices.
    pub fn frozen(&self, t: usize) -> Vec<f64> {
        (0..self.dim()).map(|d| self.dims[d].stationary(self.covariates_at(d, t))).collect()
    }

    /// Whether the recursion has any feedback, i.e. whether simulated
    /// paths differ in law from the frozen lattice.
    pub fn is_autoregressive(&self) -> bool {
        self.dims.iter().any(|p| p.intensity_feedback > 0.0 || p.count_feedback > 0.0)
    }
}
