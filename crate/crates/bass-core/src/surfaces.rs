//! Post-processing of a converged solution into the martingale interpolation
//! `mu_t = (R_{1-t} * F_1)_# (R_t * alpha_0)`, the local-volatility surface
//! `sigma = F_x ∘ F^{-1}`, and martingale diagnostics (mean constancy and
//! convex ordering of the time slices).

use crate::error::Result;
use crate::heat::{BoundaryKind, HeatPropagator};
use crate::measures::{pushforward, DiscreteMeasure, Grid1D, TimeGrid};
use crate::mpms_cdf::BassSolution;
use crate::transport::MonotoneMap;

/// Time slices of the martingale interpolation.
#[derive(Debug, Clone)]
pub struct InterpolationSurface {
    pub timegrid: TimeGrid,
    /// Marginal law at each `t_k`.
    pub slices: Vec<DiscreteMeasure>,
    /// Transport map `F(t_k, ·)` at each `t_k`.
    pub maps: Vec<MonotoneMap>,
}

/// Local volatility `sigma(t_k, x_i)`, absent where `x_i` has no preimage
/// under `F(t_k, ·)`.
#[derive(Debug, Clone)]
pub struct LocalVolSurface {
    pub timegrid: TimeGrid,
    pub grid: Grid1D,
    pub sigma: Vec<Vec<Option<f64>>>,
}

/// Mean-constancy and convex-order summary of an interpolation.
#[derive(Debug, Clone, Copy)]
pub struct MartingaleReport {
    /// `max_t |mean(mu_t) - mean(mu_0)|`
    pub max_mean_drift: f64,
    /// `min_{t<s, K interior} C_s(K) - C_t(K)`; nonnegative for a family
    /// increasing in convex order.
    pub min_convex_gap: f64,
}

/// Builds the interpolation: forward flow of the standing CDF, backward flow
/// of the terminal map, pushforward per slice.
pub fn build_interpolation(sol: &BassSolution, cfg_sigma: f64, timegrid: &TimeGrid) -> Result<InterpolationSurface> {
    let grid = sol.alpha0.grid().clone();
    let prop_cdf = HeatPropagator::new(grid.clone(), timegrid.clone(), cfg_sigma, BoundaryKind::Cdf)?;
    let prop_map = HeatPropagator::new(grid.clone(), timegrid.clone(), cfg_sigma, BoundaryKind::Map)?;

    let cdf_slices = prop_cdf.propagate_forward(sol.alpha0.cdf())?;
    let maps: Vec<MonotoneMap> = prop_map
        .propagate_backward(&sol.f1)?
        .into_iter()
        .map(|vals| MonotoneMap::from_nondecreasing(grid.clone(), vals))
        .collect::<Result<_>>()?;

    let mut slices = Vec::with_capacity(cdf_slices.len());
    for (g, f) in cdf_slices.iter().zip(&maps) {
        let alpha_t = DiscreteMeasure::from_cdf(grid.clone(), g)?;
        slices.push(pushforward(&alpha_t, f)?);
    }
    Ok(InterpolationSurface {
        timegrid: timegrid.clone(),
        slices,
        maps,
    })
}

/// Local volatility from the flowed maps: the discrete derivative of
/// `F(t_k, ·)` evaluated at `F(t_k, ·)^{-1}(x)`. Points outside the map's
/// range are reported as `None` rather than extrapolated.
pub fn local_vol(surface: &InterpolationSurface) -> LocalVolSurface {
    let grid = surface.maps[0].grid().clone();
    let n = grid.len();
    let mut sigma = Vec::with_capacity(surface.maps.len());
    for f in &surface.maps {
        let deriv = f.derivative();
        let (lo, hi) = (f.values()[0], f.values()[n - 1]);
        let mut row = Vec::with_capacity(n);
        for x in grid.points() {
            if x < lo || x > hi {
                row.push(None);
            } else {
                let y = f.inverse_clamped(x);
                let pos = (y - grid.z_min()) / grid.dx();
                let i = (pos.floor() as usize).min(n - 2);
                let theta = pos - i as f64;
                let s = deriv[i] + theta * (deriv[i + 1] - deriv[i]);
                row.push(if s > 0.0 { Some(s) } else { None });
            }
        }
        sigma.push(row);
    }
    LocalVolSurface {
        timegrid: surface.timegrid.clone(),
        grid,
        sigma,
    }
}

/// Mean drift and pairwise convex-order gap across the slices. Interior
/// strikes exclude the two boundary grid points; the minimum gap scans every
/// ordered pair of times via a running per-strike maximum.
pub fn martingale_diagnostics(surface: &InterpolationSurface) -> MartingaleReport {
    let mean0 = surface.slices[0].mean();
    let mut max_drift = 0.0_f64;
    for m in &surface.slices {
        max_drift = max_drift.max((m.mean() - mean0).abs());
    }

    let n = surface.slices[0].grid().len();
    let mut min_gap = f64::INFINITY;
    let mut running_max: Option<Vec<f64>> = None;
    for m in &surface.slices {
        let calls = m.call_curve();
        if let Some(prev_max) = &mut running_max {
            for i in 1..n - 1 {
                let gap = calls[i] - prev_max[i];
                if gap < min_gap {
                    min_gap = gap;
                }
                if calls[i] > prev_max[i] {
                    prev_max[i] = calls[i];
                }
            }
        } else {
            running_max = Some(calls);
        }
    }
    if !min_gap.is_finite() {
        min_gap = 0.0;
    }
    MartingaleReport {
        max_mean_drift: max_drift,
        min_convex_gap: min_gap,
    }
}
