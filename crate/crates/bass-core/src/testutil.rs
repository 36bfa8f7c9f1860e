//! Test-only oracles, independent of the solver code paths: closed-form
//! normal CDF/quantile via erf, and the mixed-Gaussian example marginals.

use statrs::function::erf::{erf, erf_inv};

use crate::measures::{density_from_spec, DiscreteMeasure, Grid1D, MarginalSpec};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub fn normal_quantile(u: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0)
}

/// Black-Scholes-style call value for a lognormal terminal law
/// `exp(N(location, scale^2))`, no discounting.
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

pub fn wg_mu0(grid: &Grid1D) -> DiscreteMeasure {
    density_from_spec(&wg_mu0_spec(), grid).unwrap()
}

pub fn wg_mu1(grid: &Grid1D) -> DiscreteMeasure {
    density_from_spec(&wg_mu1_spec(), grid).unwrap()
}
