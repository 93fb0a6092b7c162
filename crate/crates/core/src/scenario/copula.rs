// SPDX-License-Identifier: Apache-2.0

//! Gaussian copula: correlated normals mapped to uniforms through their own
//! marginal distribution functions.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaSpec {
    pub covariance: Vec<Vec<f64>>,
}

impl CopulaSpec {
    pub fn identity(dim: usize) -> Self {
        let covariance = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        CopulaSpec { covariance }
    }

    /// Unit variances with a common off-diagonal correlation `rho`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Self {
        let covariance = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { rho }).collect()).collect();
        CopulaSpec { covariance }
    }

    pub fn dim(&self) -> usize {
        self.covariance.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.covariance.iter().any(|r| r.len() != n) {
            return Err(Error::validation("copula covariance must be a non-empty square matrix"));
        }
        if self.covariance.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("copula covariance entries must be finite"));
        }
        for i in 0..n {
            if self.covariance[i][i] <= 0.0 {
                return Err(Error::validation(format!("copula variance {i} must be positive")));
            }
            for j in 0..i {
                if (self.covariance[i][j] - self.covariance[j][i]).abs() > 1e-12 {
                    return Err(Error::validation(format!("copula covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| self.covariance[i][j]);
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::validation(format!("copula covariance is not positive semidefinite (eigenvalue {min:e})")));
        }
        Ok(())
    }

    /// Validates and factors the covariance for sampling.
    pub fn sampler(&self) -> Result<CopulaSampler> {
        self.validate()?;
        let n = self.dim();
        // Cholesky that tolerates semidefinite matrices: a vanishing pivot
        // leaves its column at zero.
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.covariance[j][j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            let tol = 1e-12 * self.covariance[j][j];
            if d <= tol {
                continue;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = self.covariance[i][j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        let scale = (0..n).map(|i| self.covariance[i][i].sqrt()).collect();
        Ok(CopulaSampler { dim: n, lower: l, scale, normals: vec![0.0; n] })
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Keeps a uniform strictly inside (0, 1).
fn open_unit(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Draws uniform vectors whose dependence is the Gaussian copula of a
/// covariance matrix.
#[derive(Clone, Debug)]
pub struct CopulaSampler {
    dim: usize,
    lower: Vec<f64>,
    scale: Vec<f64>,
    normals: Vec<f64>,
}

impl CopulaSampler {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fills `out` with one copula draw.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim;
        for g in self.normals.iter_mut() {
            *g = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            let z: f64 = row.iter().zip(&self.normals).map(|(a, b)| a * b).sum();
            out[i] = open_unit(normal_cdf(z / self.scale[i]));
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Draws one copula-uniform vector from `stream`.
pub fn sample_copula_uniforms(copula: &CopulaSpec, stream: &super::RandomStream) -> Result<Vec<f64>> {
    let mut sampler = copula.sampler()?;
    Ok(sampler.sample(&mut stream.rng()))
}
