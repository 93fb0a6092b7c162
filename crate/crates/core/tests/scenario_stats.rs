// SPDX-License-Identifier: Apache-2.0

mod common;

use common::tiny_instance;
use drayage_core::instancegen::gen_small_instance;
use drayage_core::scenario::{
    build_lattice, correlated_counts, panel_rows, poisson_count_from_uniforms, sample_scenario, CopulaSpec, FlowModel,
    IntensityModel, RandomStream,
};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn uniforms(rng: &mut impl Rng) -> impl Iterator<Item = f64> + '_ {
    std::iter::repeat_with(move || loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    })
}

fn poisson_sample(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
    let mut rng = RandomStream::new(seed).child("poisson").rng();
    (0..n).map(|_| poisson_count_from_uniforms(lambda, uniforms(&mut rng)).unwrap()).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let n = a.len() as f64;
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    cov / (va * vb).sqrt()
}

/// Pearson chi-square against the exact pmf, pooling adjacent cells until
/// every expected count is at least 5. Returns the p-value.
fn chi_square_p(sample: &[u64], lambda: f64) -> f64 {
    let pois = Poisson::new(lambda).unwrap();
    let n = sample.len() as f64;
    let max = *sample.iter().max().unwrap();
    let mut observed = vec![0.0; max as usize + 1];
    for &k in sample {
        observed[k as usize] += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (k, &obs) in observed.iter().enumerate() {
        o += obs;
        e += n * pois.pmf(k as u64);
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    // Right tail beyond the largest observation goes into the last cell.
    let used: f64 = cells.iter().map(|c| c.1).sum::<f64>() + e;
    e += n - used;
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn poisson_chi_square_small_rates() {
    for (lambda, seed) in [(1.0, 11), (5.0, 12)] {
        let p = chi_square_p(&poisson_sample(lambda, 10_000, seed), lambda);
        assert!(p > 0.001, "lambda {lambda}: p-value {p}");
    }
}

#[test]
fn poisson_large_rate_moments_and_fit() {
    let sample = poisson_sample(2000.0, 10_000, 13);
    let xs: Vec<f64> = sample.iter().map(|&k| k as f64).collect();
    let (m, v) = mean_var(&xs);
    assert!((m - 2000.0).abs() <= 1.35, "mean {m}");
    assert!((0.95..=1.05).contains(&(v / m)), "dispersion {}", v / m);
    assert!(chi_square_p(&sample, 2000.0) > 0.001);
}

#[test]
fn zero_rate_consumes_nothing() {
    assert_eq!(poisson_count_from_uniforms(0.0, std::iter::empty()).unwrap(), 0);
    assert!(poisson_count_from_uniforms(-1.0, std::iter::empty()).is_err());
    assert!(poisson_count_from_uniforms(3.0, [0.5]).is_err());
}

fn copula_counts(lambda: f64, rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut sampler = CopulaSpec::equicorrelated(2, rho).sampler().unwrap();
    let mut rng = RandomStream::new(seed).child("copula").rng();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let c = correlated_counts(&[lambda, lambda], &mut sampler, &mut rng).unwrap();
        a.push(c[0] as f64);
        b.push(c[1] as f64);
    }
    (a, b)
}

/// Independent reference: Box-Muller normals, 2x2 Cholesky, Phi through the
/// statrs normal CDF, and products of uniforms compared against exp(-lambda).
fn oracle_count_correlation(lambda: f64, rho: f64, n: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use statrs::distribution::Normal;
    let phi = Normal::standard();
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let threshold = (-lambda).exp();
    let mut pair = || {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let (z1, z2) = (r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin());
        let w = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
        (phi.cdf(z1).clamp(1e-300, 1.0), phi.cdf(w).clamp(1e-300, 1.0))
    };
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (mut pa, mut pb) = (1.0, 1.0);
        let (mut ka, mut kb) = (0u64, 0u64);
        let (mut da, mut db) = (false, false);
        while !(da && db) {
            let (ua, ub) = pair();
            if !da {
                pa *= ua;
                if pa < threshold { da = true } else { ka += 1 }
            }
            if !db {
                pb *= ub;
                if pb < threshold { db = true } else { kb += 1 }
            }
        }
        a.push(ka as f64);
        b.push(kb as f64);
    }
    corr(&a, &b)
}

#[test]
fn identity_copula_gives_uncorrelated_counts() {
    let (a, b) = copula_counts(20.0, 0.0, 5000, 21);
    assert!(corr(&a, &b).abs() < 0.05);
}

#[test]
fn correlated_copula_matches_oracle() {
    let lambda = 5.0;
    let reference = oracle_count_correlation(lambda, 0.5, 1_000_000, 99);
    let (a, b) = copula_counts(lambda, 0.5, 10_000, 22);
    let got = corr(&a, &b);
    assert!((got - reference).abs() <= 0.05, "count correlation {got}, oracle {reference}");
    assert!(reference > 0.1);
}

#[test]
fn copula_keeps_poisson_marginals() {
    let (a, _) = copula_counts(5.0, 0.5, 10_000, 23);
    let sample: Vec<u64> = a.iter().map(|&x| x as u64).collect();
    assert!(chi_square_p(&sample, 5.0) > 0.001);
}

fn tiny_model(instance: &drayage_core::Instance, rate: f64, spot: (f64, f64)) -> FlowModel {
    let dim = instance.flow_dim();
    FlowModel { intensity: IntensityModel::constant(dim, rate), copula: CopulaSpec::identity(dim), spot_bounds: spot }
}

#[test]
fn spot_rates_are_uniform_on_bounds() {
    let inst = tiny_instance(1);
    let model = tiny_model(&inst, 10.0, (3.0, 9.0));
    let lattice = build_lattice(&inst, &model, 2000, &RandomStream::new(31)).unwrap();
    let rates: Vec<f64> = lattice.stages[0]
        .iter()
        .flat_map(|n| n.realization.spot_rate.rates.iter().flatten().copied().collect::<Vec<_>>())
        .collect();
    assert!(rates.len() >= 10_000);
    assert!(rates.iter().all(|r| (3.0..=9.0).contains(r)));
    let (m, _) = mean_var(&rates);
    assert!((m - 6.0).abs() < 0.05, "spot mean {m}");

    let model = tiny_model(&inst, 10.0, (5.0, 5.0));
    let lattice = build_lattice(&inst, &model, 5, &RandomStream::new(31)).unwrap();
    assert!(lattice.stages[0].iter().all(|n| n.realization.spot_rate.rates.iter().flatten().all(|&r| r == 5.0)));
}

#[test]
fn lattice_shape_and_reproducibility() {
    let p = gen_small_instance(&RandomStream::new(4)).unwrap();
    let s = RandomStream::new(5).child("lattice");
    let a = build_lattice(&p.instance, &p.flow_model, 20, &s).unwrap();
    assert_eq!(a.horizon(), 12);
    assert!(a.stages.iter().all(|st| st.len() == 20));
    for st in &a.stages {
        assert!((st.iter().map(|n| n.probability).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    a.validate(&p.instance).unwrap();
    let b = build_lattice(&p.instance, &p.flow_model, 20, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    let c = build_lattice(&p.instance, &p.flow_model, 20, &RandomStream::new(6).child("lattice")).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert!(build_lattice(&p.instance, &p.flow_model, 0, &s).is_err());
}

#[test]
fn scenario_sampling_and_panel() {
    let inst = tiny_instance(3);
    let model = tiny_model(&inst, 15.0, (3.5, 8.0));
    let s1 = sample_scenario(&inst, &model, &RandomStream::new(7).child("scenario").child(0)).unwrap();
    let s2 = sample_scenario(&inst, &model, &RandomStream::new(7).child("scenario").child(1)).unwrap();
    assert_eq!(s1.len(), 3);
    assert_ne!(s1, s2);
    let rows = panel_rows(&inst, &[s1.clone(), s2]);
    let per_stage = inst.num_entries() + inst.num_exits() + inst.num_carriers() * inst.num_lanes();
    assert_eq!(rows.len(), 2 * 3 * per_stage);
    assert_eq!(rows[0].dimension, "inflow:E0");
    assert_eq!(rows[0].value, s1[0].inflow[0]);
    assert!(rows.iter().any(|r| r.dimension == "spot:K1:E0->X1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_monotone_in_rate(lo in 0.1f64..50.0, extra in 0.0f64..50.0, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed).rng();
        let us: Vec<f64> = uniforms(&mut rng).take(400).collect();
        let a = poisson_count_from_uniforms(lo, us.iter().copied()).unwrap();
        let b = poisson_count_from_uniforms(lo + extra, us.iter().copied()).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn lattice_probabilities_normalized(n in 1usize..8, seed in any::<u64>()) {
        let inst = tiny_instance(2);
        let model = tiny_model(&inst, 12.0, (3.5, 8.0));
        let l = build_lattice(&inst, &model, n, &RandomStream::new(seed)).unwrap();
        for st in &l.stages {
            prop_assert_eq!(st.len(), n);
            prop_assert!((st.iter().map(|x| x.probability).sum::<f64>() - 1.0).abs() < 1e-12);
            for node in st {
                prop_assert!(node.realization.inflow.iter().chain(&node.realization.outflow).all(|v| *v >= 0.0 && v.fract() == 0.0));
            }
        }
    }
}
