// SPDX-License-Identifier: Apache-2.0

//! Poisson counts from uniform streams: unit-rate arrivals are counted
//! until the accumulated exponential waiting time exceeds one.

use rand::Rng;

use super::copula::CopulaSampler;
use crate::error::{Error, Result};

/// Incremental counter fed one uniform at a time.
#[derive(Clone, Debug)]
pub struct PoissonCounter {
    rate: f64,
    elapsed: f64,
    count: u64,
    done: bool,
}

impl PoissonCounter {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::validation(format!("Poisson rate {rate} must be finite and nonnegative")));
        }
        Ok(PoissonCounter { rate, elapsed: 0.0, count: 0, done: rate == 0.0 })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Consumes one uniform; returns whether the count is final.
    pub fn feed(&mut self, u: f64) -> Result<bool> {
        if self.done {
            return Ok(true);
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::validation(format!("uniform {u} outside (0, 1)")));
        }
        self.elapsed += -u.ln() / self.rate;
        if self.elapsed > 1.0 {
            self.done = true;
        } else {
            self.count += 1;
        }
        Ok(self.done)
    }
}

/// Largest `n` whose first `n` exponential waiting times `-ln(u)/rate` sum
/// to at most one. A zero rate returns 0 without consuming any uniform.
pub fn poisson_count_from_uniforms(rate: f64, uniforms: impl IntoIterator<Item = f64>) -> Result<u64> {
    let mut counter = PoissonCounter::new(rate)?;
    let mut it = uniforms.into_iter();
    while !counter.is_done() {
        let u = it.next().ok_or_else(|| Error::validation("uniform stream exhausted before the count finished"))?;
        counter.feed(u)?;
    }
    Ok(counter.count())
}

/// Correlated Poisson counts, one per copula dimension. Term `l` of every
/// dimension uses component `d` of the `l`-th copula draw.
pub fn correlated_counts<R: Rng + ?Sized>(rates: &[f64], sampler: &mut CopulaSampler, rng: &mut R) -> Result<Vec<u64>> {
    if rates.len() != sampler.dim() {
        return Err(Error::structural(format!(
            "{} rates for a {}-dimensional copula",
            rates.len(),
            sampler.dim()
        )));
    }
    let mut counters = rates.iter().map(|&r| PoissonCounter::new(r)).collect::<Result<Vec<_>>>()?;
    let mut u = vec![0.0; rates.len()];
    while counters.iter().any(|c| !c.is_done()) {
        sampler.sample_into(rng, &mut u);
        for (c, &ud) in counters.iter_mut().zip(&u) {
            c.feed(ud)?;
        }
    }
    Ok(counters.iter().map(|c| c.count()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_consumes_nothing() {
        assert_eq!(poisson_count_from_uniforms(0.0, std::iter::empty()).unwrap(), 0);
    }

    #[test]
    fn constant_half_stream() {
        // -ln(0.5) = 0.6931 <= 1 < 1.3863
        assert_eq!(poisson_count_from_uniforms(1.0, std::iter::repeat(0.5)).unwrap(), 1);
        assert_eq!(poisson_count_from_uniforms(3.0, std::iter::repeat(0.5)).unwrap(), 4);
    }

    #[test]
    fn rejects_out_of_range_uniform() {
        assert!(poisson_count_from_uniforms(1.0, [0.0]).is_err());
        assert!(poisson_count_from_uniforms(1.0, [1.0]).is_err());
        assert!(poisson_count_from_uniforms(1.0, [0.9]).is_err(), "exhausted stream");
        assert!(poisson_count_from_uniforms(-1.0, [0.5]).is_err());
    }
}
