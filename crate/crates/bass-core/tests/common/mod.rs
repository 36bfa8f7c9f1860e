//! Shared fixtures for the integration suites: the worked example marginals,
//! random convex-order mixture pairs, and closed-form oracles independent of
//! the library's numerical paths.

use bass_core::{density_from_spec, DiscreteMeasure, Grid1D, MarginalSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erf, erf_inv};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub fn normal_quantile(u: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0)
}

/// Call value under a lognormal terminal law `exp(N(location, scale^2))`.
pub fn lognormal_call(location: f64, scale: f64, strike: f64) -> f64 {
    let mean = (location + 0.5 * scale * scale).exp();
    if strike <= 0.0 {
        return mean - strike;
    }
    let d2 = (location - strike.ln()) / scale;
    let d1 = d2 + scale;
    mean * normal_cdf(d1) - strike * normal_cdf(d2)
}

pub fn wg_mu0_spec() -> MarginalSpec {
    MarginalSpec::gaussian(0.0, 0.5)
}

pub fn wg_mu1_spec() -> MarginalSpec {
    MarginalSpec::NormalMixture {
        weights: vec![0.25, 0.5, 0.25],
        means: vec![-1.0, 0.0, 1.0],
        variances: vec![0.25, 0.5, 0.25],
    }
}

pub fn wg_pair(grid: &Grid1D) -> (DiscreteMeasure, DiscreteMeasure) {
    (
        density_from_spec(&wg_mu0_spec(), grid).unwrap(),
        density_from_spec(&wg_mu1_spec(), grid).unwrap(),
    )
}

pub fn lognormal_mu0_spec() -> MarginalSpec {
    // location r - sigma0^2/2 with r = 0.05, sigma0 = 0.2
    MarginalSpec::Lognormal { location: 0.05 - 0.5 * 0.04, scale: 0.2 }
}

pub fn lognormal_mu1_spec() -> MarginalSpec {
    // location 2r - sigma1^2 with r = 0.05, sigma1 = 0.4
    MarginalSpec::Lognormal { location: 0.1 - 0.16, scale: 0.4 }
}

/// Random mixture and its independent-noise fattening: `mu1` is `mu0`
/// convolved with `N(0, s)`, so the pair is in strict convex order with
/// equal means by construction.
pub fn random_convex_pair(rng: &mut ChaCha8Rng, grid: &Grid1D) -> (DiscreteMeasure, DiscreteMeasure) {
    let k = rng.gen_range(1..=4);
    let mut weights = Vec::new();
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for _ in 0..k {
        weights.push(rng.gen_range(0.2..1.0));
        means.push(rng.gen_range(-1.0..1.0));
        variances.push(rng.gen_range(0.1..0.5));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let s = rng.gen_range(0.3..0.8);
    let mu0 = MarginalSpec::NormalMixture {
        weights: weights.clone(),
        means: means.clone(),
        variances: variances.clone(),
    };
    let mu1 = MarginalSpec::NormalMixture {
        weights,
        means,
        variances: variances.iter().map(|v| v + s).collect(),
    };
    (
        density_from_spec(&mu0, grid).unwrap(),
        density_from_spec(&mu1, grid).unwrap(),
    )
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
