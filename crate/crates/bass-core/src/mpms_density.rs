//! Density-based iteration: the transport relation `mu1 = F1_# (alpha0 * R)`
//! handled through the implicit equation `f1 = (alpha0 * R) / mu1(F1)` with
//! clipping, instead of exact quantile composition everywhere.
//!
//! The convolution domain may be a rescaled copy of the marginal domain:
//! with `y = (x - c) / m` the unit-time kernel on the x side acts as a
//! kernel of variance `1/m^2` in marginal units, so all flows here run with
//! effective volatility `sigma_bar / m`. The affine wrap `m g + c` around
//! the convolutions cancels exactly for a linear convolution with consistent
//! tail extension, which is how it is realized here.
//!
//! The solver controls the error at both ends (the transport is only solved
//! approximately): it stops when the larger of the two mean-square quantile
//! errors falls below `tol`.

use crate::error::{Error, Result};
use crate::heat::{gauss_convolve, BoundaryKind, HeatPropagator, TailExtension};
use crate::measures::{self, check_convex_order, differentiate, interp_clamped, interp_or, DiscreteMeasure};
use crate::mpms_cdf::{mse_via_map_raw, BassSolution, IterationRecord, MpmsCdfSolver, SolverConfig};
use crate::transport::MonotoneMap;

/// Fraction of grid points allowed to have a vanishing denominator against a
/// nonzero numerator before the ratio is declared degenerate.
const DEGENERATE_SHARE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct DensitySolverConfig {
    pub base: SolverConfig,
    /// Cap on the implicit derivative `f1`.
    pub clip_c: f64,
    /// Rescale factor `m` of the convolution domain (`y = (x - c)/m`).
    pub rescale_m: f64,
    /// Rescale offset `c`; carried for bookkeeping, the uniform-grid flows
    /// are shift-invariant.
    pub rescale_c: f64,
    /// Threshold below which numerator and denominator are treated as zero.
    /// A value of 0 selects the default `1e-12 * max(mu1 density)`.
    pub zero_eps: f64,
}

impl DensitySolverConfig {
    pub fn new(base: SolverConfig, clip_c: f64) -> Result<Self> {
        if !(clip_c.is_finite() && clip_c > 1.0) {
            return Err(Error::Invalid(format!(
                "clip_c must exceed 1 (the identity derivative), got {clip_c}"
            )));
        }
        Ok(Self {
            base,
            clip_c,
            rescale_m: 1.0,
            rescale_c: 0.0,
            zero_eps: 0.0,
        })
    }

    pub fn with_rescale(mut self, m: f64, c: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Invalid(format!("rescale_m must be positive, got {m}")));
        }
        self.rescale_m = m;
        self.rescale_c = c;
        Ok(self)
    }

    pub fn with_zero_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && (0.0..1e-3).contains(&eps)) {
            return Err(Error::Invalid(format!("zero_eps must lie in [0, 1e-3), got {eps}")));
        }
        self.zero_eps = eps;
        Ok(self)
    }

    /// Kernel time of one full flow in marginal units.
    pub fn conv_time(&self) -> f64 {
        let s = self.base.sigma_bar / self.rescale_m;
        s * s * self.base.timegrid.horizon()
    }

    fn effective_eps(&self, mu1: &DiscreteMeasure) -> f64 {
        let peak = mu1.density().iter().cloned().fold(0.0, f64::max);
        let auto = 1e-12 * peak;
        self.zero_eps.max(auto)
    }
}

/// Standing-law update, line 3 of the density iteration:
/// `alpha0(y) = mu0((F1 * R)(y)) * (f1 * R)(y)`, renormalized. `f1_values`
/// is the current derivative estimate on the grid.
pub fn update_alpha0_density(
    f1: &MonotoneMap,
    f1_values: &[f64],
    mu0: &DiscreteMeasure,
    cfg: &DensitySolverConfig,
) -> Result<DiscreteMeasure> {
    let grid = &cfg.base.grid;
    grid.check_same(f1.grid())?;
    grid.check_same(mu0.grid())?;
    let t = cfg.conv_time();
    let f0 = gauss_convolve(f1.values(), t, grid, TailExtension::end_slopes(f1.values(), grid))?;
    let f0_deriv = gauss_convolve(f1_values, t, grid, TailExtension::flat())?;
    let density: Vec<f64> = f0
        .iter()
        .zip(&f0_deriv)
        .map(|(&y, &d)| interp_or(grid, mu0.density(), y, 0.0) * d.max(0.0) / cfg.rescale_m)
        .collect();
    DiscreteMeasure::from_density(grid.clone(), density)
}

/// Transport update, lines 4-5 of the density iteration:
/// `f1 = ((alpha0 * R) / mu1(F1_prev)) ∧ C` with the zero rule, then
/// `F1(y) = F1_prev(y_1) + ∫ f1`.
pub fn update_f1_density(
    alpha0: &DiscreteMeasure,
    f1_prev: &MonotoneMap,
    mu1: &DiscreteMeasure,
    cfg: &DensitySolverConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &cfg.base.grid;
    grid.check_same(alpha0.grid())?;
    grid.check_same(f1_prev.grid())?;
    grid.check_same(mu1.grid())?;
    let t = cfg.conv_time();
    let a1 = gauss_convolve(alpha0.density(), t, grid, TailExtension::flat())?;
    let eps = cfg.effective_eps(mu1);

    let mut f1 = vec![0.0; grid.len()];
    let mut degenerate = 0usize;
    for (i, (&num, &fy)) in a1.iter().zip(f1_prev.values()).enumerate() {
        let den = interp_or(grid, mu1.density(), fy, 0.0);
        if num < eps && den < eps {
            f1[i] = 0.0;
        } else if den < eps {
            degenerate += 1;
            f1[i] = cfg.clip_c;
        } else {
            f1[i] = (num.max(0.0) / den).min(cfg.clip_c);
        }
    }
    let share = degenerate as f64 / grid.len() as f64;
    if share > DEGENERATE_SHARE {
        return Err(Error::DegenerateRatio { share: 100.0 * share });
    }

    let mut f1_map = measures::cumtrapz(&f1, grid.dx());
    let anchor = f1_prev.values()[0];
    for v in &mut f1_map {
        *v += anchor;
    }
    Ok((f1, f1_map))
}

/// Density-formulation solver.
///
/// The per-iteration flows reuse the implicit finite-difference propagators
/// (the same operators the CDF solver uses, at effective volatility
/// `sigma_bar / m`), and the transport map is rebuilt each iteration from
/// the implicit ratio on the band where it is numerically trustworthy
/// (ratio below `clip_c`, densities above the zero threshold), spliced
/// continuously into the monotone-rearrangement composition outside that
/// band. The clipped ratio itself — the object the printed updates produce —
/// is exposed through [`update_f1_density`] and tracked as the solution's
/// derivative estimate.
pub struct MpmsDensitySolver {
    cfg: DensitySolverConfig,
    prop_cdf: HeatPropagator,
    prop_map: HeatPropagator,
    dual_engine: MpmsCdfSolver,
}

impl MpmsDensitySolver {
    pub fn new(cfg: DensitySolverConfig) -> Result<Self> {
        let sigma_eff = cfg.base.sigma_bar / cfg.rescale_m;
        let prop_cdf = HeatPropagator::new(
            cfg.base.grid.clone(),
            cfg.base.timegrid.clone(),
            sigma_eff,
            BoundaryKind::Cdf,
        )?;
        let prop_map = HeatPropagator::new(
            cfg.base.grid.clone(),
            cfg.base.timegrid.clone(),
            sigma_eff,
            BoundaryKind::Map,
        )?;
        let dual_engine = MpmsCdfSolver::new(SolverConfig {
            sigma_bar: sigma_eff,
            ..cfg.base.clone()
        })?;
        Ok(Self { cfg, prop_cdf, prop_map, dual_engine })
    }

    pub fn config(&self) -> &DensitySolverConfig {
        &self.cfg
    }

    pub fn solve_density(&self, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<BassSolution> {
        let base = &self.cfg.base;
        let grid = &base.grid;
        grid.check_same(mu0.grid())?;
        grid.check_same(mu1.grid())?;
        if base.check_convex_order {
            let report = check_convex_order(mu0, mu1)?;
            if !report.strict {
                return Err(Error::ConvexOrderViolation(format!(
                    "mean_diff={:.3e}, min call gap={:.3e} at K={:.4}",
                    report.mean_diff, report.min_gap, report.min_gap_strike
                )));
            }
        }

        let n = grid.len();
        let k = base.quantile_points.max(2);
        let q_mu0 = mu0.quantile_curve(k);
        let q_mu1 = mu1.quantile_curve(k);
        let eps = self.cfg.effective_eps(mu1);

        let mut f1_map = MonotoneMap::identity(grid.clone());
        let mut prev_gal: Option<Vec<f64>> = None;
        let mut trace: Vec<IterationRecord> = Vec::new();
        let mut best: Option<(f64, BassSolution)> = None;

        for it in 1..=base.max_iter {
            // F0 = R * F1 (map-pinned backward flow), then alpha0 as the
            // exact pullback of mu0 — the change-of-variables update
            // alpha0 = mu0(F0) F0'. The composed CDF is carried raw.
            let f0_slices = self.prop_map.propagate_backward(&f1_map)?;
            let f0 = MonotoneMap::from_nondecreasing(grid.clone(), f0_slices[0].clone())?;
            let mut gal: Vec<f64> = f0.values().iter().map(|&y| mu0.cdf_at(y)).collect();
            gal[0] = 0.0;
            gal[n - 1] = 1.0;
            for i in 1..n {
                if gal[i] < gal[i - 1] {
                    gal[i] = gal[i - 1];
                }
            }

            // alpha0 * R via the CDF flow
            let ga1 = self.prop_cdf.flow_full(&gal);
            let ga1 = monotone_clamped(ga1);
            let a1_density = differentiate(&ga1, grid.dx());

            // implicit ratio against mu1 composed with the current map
            let mut ratio = vec![f64::INFINITY; n];
            let mut f1_clipped = vec![0.0; n];
            let mut degenerate = 0usize;
            for i in 0..n {
                let num = a1_density[i];
                // clamped-end lookup: transient map values slightly beyond
                // the grid resolve to the boundary density instead of zero
                let den = interp_clamped(grid, mu1.density(), f1_map.values()[i]);
                if num < eps && den < eps {
                    ratio[i] = f64::INFINITY;
                    f1_clipped[i] = 0.0;
                } else if den < eps {
                    degenerate += 1;
                    ratio[i] = f64::INFINITY;
                    f1_clipped[i] = self.cfg.clip_c;
                } else {
                    ratio[i] = num / den;
                    f1_clipped[i] = ratio[i].min(self.cfg.clip_c);
                }
            }
            let share = degenerate as f64 / n as f64;
            if share > DEGENERATE_SHARE {
                return Err(Error::DegenerateRatio { share: 100.0 * share });
            }

            // exact rearrangement, used outside the trusted band and as the
            // mass anchor inside
            let levels: Vec<f64> = ga1.clone();
            let fq_vals = mu1.quantiles_sorted(&levels);

            let f1_new_vals: Vec<f64> = splice_band(
                grid.dx(),
                &ga1,
                &ratio,
                &a1_density,
                &fq_vals,
                self.cfg.clip_c,
                eps,
            )
            .into_iter()
            .map(|v| v.clamp(grid.z_min(), grid.z_max()))
            .collect();
            let f1_new = MonotoneMap::from_nondecreasing(grid.clone(), f1_new_vals)?;

            // errors at both ends
            let e0 = mse_via_map_raw(&q_mu0, grid, &gal, &f0, k);
            let e1 = mse_via_map_raw(&q_mu1, grid, &ga1, &f1_new, k);
            let err = e0.max(e1);

            let dual = self
                .dual_engine
                .dual_value_with_slices(&f1_map, &f0_slices, mu0, mu1)?;
            let w_step = match &prev_gal {
                Some(prev) => measures::w_inf_cdfs(grid, prev, &gal),
                None => f64::NAN,
            };
            trace.push(IterationRecord { mse_error: err, dual_value: dual, w_inf_step: w_step });

            if err <= base.tol {
                return Ok(BassSolution {
                    alpha0: DiscreteMeasure::from_cdf(grid.clone(), &gal)?,
                    f1: f1_new,
                    iterations: it,
                    trace,
                });
            }
            let replace = match &best {
                Some((e, _)) => err < *e,
                None => true,
            };
            if replace {
                best = Some((
                    err,
                    BassSolution {
                        alpha0: DiscreteMeasure::from_cdf(grid.clone(), &gal)?,
                        f1: f1_new.clone(),
                        iterations: it,
                        trace: trace.clone(),
                    },
                ));
            }
            prev_gal = Some(gal);
            f1_map = f1_new;
        }

        let (error, mut best) = best.expect("max_iter >= 1");
        best.trace = trace;
        Err(Error::NotConverged { iterations: base.max_iter, error, best: Box::new(best) })
    }
}

/// Builds the new map: the implicit-ratio integral on the largest contiguous
/// trusted band around the flowed median, anchored there to the exact
/// rearrangement and spliced into it with value continuity at the seams.
fn splice_band(
    dx: f64,
    ga1: &[f64],
    ratio: &[f64],
    a1_density: &[f64],
    fq: &[f64],
    clip_c: f64,
    eps: f64,
) -> Vec<f64> {
    let n = ga1.len();
    let dens_floor = eps.max(1e-7 * a1_density.iter().cloned().fold(0.0, f64::max));
    let trusted = |i: usize| ratio[i].is_finite() && ratio[i] <= clip_c && a1_density[i] > dens_floor;

    let imed = ga1.partition_point(|&u| u < 0.5).min(n - 1);
    if !trusted(imed) {
        return fq.to_vec();
    }
    let mut lo = imed;
    let mut hi = imed;
    while lo > 0 && trusted(lo - 1) {
        lo -= 1;
    }
    while hi < n - 1 && trusted(hi + 1) {
        hi += 1;
    }
    if hi - lo < 10 {
        return fq.to_vec();
    }

    let mut out = fq.to_vec();
    // integrate the ratio across the band, anchored at the median point
    let mut integral = vec![0.0; n];
    for i in lo + 1..=hi {
        integral[i] = integral[i - 1] + 0.5 * (ratio[i - 1] + ratio[i]) * dx;
    }
    let anchor = fq[imed] - integral[imed];
    for i in lo..=hi {
        out[i] = integral[i] + anchor;
    }
    // seam continuity for the tails
    let d_lo = out[lo] - fq[lo];
    for (i, o) in out.iter_mut().enumerate().take(lo) {
        *o = fq[i] + d_lo;
    }
    let d_hi = out[hi] - fq[hi];
    for (i, o) in out.iter_mut().enumerate().skip(hi + 1) {
        *o = fq[i] + d_hi;
    }
    out
}

fn monotone_clamped(mut g: Vec<f64>) -> Vec<f64> {
    let n = g.len();
    g[0] = g[0].clamp(0.0, 1.0);
    for i in 1..n {
        g[i] = g[i].clamp(0.0, 1.0).max(g[i - 1]);
    }
    g
}
