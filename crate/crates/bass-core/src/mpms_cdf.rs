//! Measure-preserving martingale Sinkhorn iteration in CDF form.
//!
//! One step, starting from the standing law's CDF `G_a`:
//!
//! 1. flow `G_a` forward over `[0, T]` (CDF boundary: 0 and 1 pinned),
//! 2. `F_1 = G_mu1^{-1} ∘ (flowed CDF)` — the monotone rearrangement onto
//!    the terminal marginal,
//! 3. flow `F_1` backward over `[0, T]` (map boundary: `z_min`, `z_max`
//!    pinned) giving `F_0`,
//! 4. `G_a_new = G_mu0 ∘ F_0`.
//!
//! The iteration starts from `F_1 = Id`, equivalently `alpha_0 = mu_0`,
//! and stops when the mean-square horizontal distance between the model's
//! time-0 CDF and the target drops below `tol`. Each iteration records the
//! dual-objective value `∫psi dmu1 - ∫(psi* * R)* dmu0` (non-increasing in
//! this inf form) and the W-infinity distance between consecutive standing
//! laws (non-increasing by the contraction property).

use crate::error::{Error, Result};
use crate::heat::{BoundaryKind, HeatPropagator};
use crate::measures::{self, check_convex_order, DiscreteMeasure, Grid1D, TimeGrid};
use crate::transport::{antiderivative, conjugate_value, MonotoneMap};

/// Configuration shared by the iterative solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: Grid1D,
    pub timegrid: TimeGrid,
    pub sigma_bar: f64,
    /// Stopping threshold on the mean-square quantile error.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of uniform probability levels in the error metric
    /// (defaults to the grid size).
    pub quantile_points: usize,
    /// Verify strict convex order before iterating. The iterates preserve
    /// it, so the check runs once.
    pub check_convex_order: bool,
}

impl SolverConfig {
    pub fn new(grid: Grid1D, timegrid: TimeGrid, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Invalid(format!("tol must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(Error::Invalid("max_iter must be at least 1".into()));
        }
        let quantile_points = grid.len();
        Ok(Self {
            grid,
            timegrid,
            sigma_bar: 1.0,
            tol,
            max_iter,
            quantile_points,
            check_convex_order: true,
        })
    }

    pub fn with_sigma_bar(mut self, sigma_bar: f64) -> Self {
        self.sigma_bar = sigma_bar;
        self
    }

    pub fn with_order_check(mut self, check: bool) -> Self {
        self.check_convex_order = check;
        self
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    /// Mean-square horizontal distance between the model time-0 CDF and the
    /// target.
    pub mse_error: f64,
    /// Dual objective in inf form; non-increasing along the iteration.
    pub dual_value: f64,
    /// W-infinity distance between consecutive standing laws.
    pub w_inf_step: f64,
}

/// Converged output of either solver.
#[derive(Debug, Clone)]
pub struct BassSolution {
    /// Standing law of the underlying Brownian motion.
    pub alpha0: DiscreteMeasure,
    /// Terminal transport map.
    pub f1: MonotoneMap,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

/// Outcome of one fixed-point step.
pub struct MpmsStep {
    pub alpha0_new: DiscreteMeasure,
    pub f1: MonotoneMap,
    pub f0: MonotoneMap,
    /// Backward flow slices `F(t_0), ..., F(t_M)`; `[0]` holds `f0`'s values.
    pub map_slices: Vec<Vec<f64>>,
}

struct RawStep {
    alpha_cdf_new: Vec<f64>,
    f1: MonotoneMap,
    f0: MonotoneMap,
    map_slices: Vec<Vec<f64>>,
}

/// CDF-form solver. Holds the two propagators (same tridiagonal operator,
/// different boundary pins).
pub struct MpmsCdfSolver {
    cfg: SolverConfig,
    prop_cdf: HeatPropagator,
    prop_map: HeatPropagator,
}

impl MpmsCdfSolver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        let prop_cdf = HeatPropagator::new(
            cfg.grid.clone(),
            cfg.timegrid.clone(),
            cfg.sigma_bar,
            BoundaryKind::Cdf,
        )?;
        let prop_map = HeatPropagator::new(
            cfg.grid.clone(),
            cfg.timegrid.clone(),
            cfg.sigma_bar,
            BoundaryKind::Map,
        )?;
        Ok(Self { cfg, prop_cdf, prop_map })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn propagator_cdf(&self) -> &HeatPropagator {
        &self.prop_cdf
    }

    pub fn propagator_map(&self) -> &HeatPropagator {
        &self.prop_map
    }

    /// One fixed-point step from the standing law `alpha0`.
    pub fn step(
        &self,
        alpha0: &DiscreteMeasure,
        mu0: &DiscreteMeasure,
        mu1: &DiscreteMeasure,
    ) -> Result<MpmsStep> {
        let grid = &self.cfg.grid;
        grid.check_same(alpha0.grid())?;
        grid.check_same(mu0.grid())?;
        grid.check_same(mu1.grid())?;
        let raw = self.step_raw(alpha0.cdf(), mu0, mu1)?;
        let alpha0_new = DiscreteMeasure::from_cdf(grid.clone(), &raw.alpha_cdf_new)?;
        Ok(MpmsStep {
            alpha0_new,
            f1: raw.f1,
            f0: raw.f0,
            map_slices: raw.map_slices,
        })
    }

    /// Step on a raw standing CDF. The composed CDF is carried verbatim
    /// (no density round-trip), which preserves the exact piecewise-linear
    /// inverse relations the error metric relies on.
    fn step_raw(&self, alpha_cdf: &[f64], mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<RawStep> {
        let grid = &self.cfg.grid;

        // (i) forward heat flow of the standing CDF
        let flowed = self.prop_cdf.flow_full(alpha_cdf);

        // (ii) monotone rearrangement onto mu1; dead-tail flats (saturated
        // CDF values) are nudged, genuine decreases cannot occur
        let levels: Vec<f64> = flowed.iter().map(|u| u.clamp(0.0, 1.0)).collect();
        let f1_vals = mu1.quantiles_sorted(&levels);
        let f1 = MonotoneMap::from_nondecreasing(grid.clone(), f1_vals)?;

        // (iii) backward heat flow of the map
        let map_slices = self.prop_map.propagate_backward(&f1)?;
        let f0 = MonotoneMap::from_nondecreasing(grid.clone(), map_slices[0].clone())?;

        // (iv) pull mu0 back through F0
        let mut alpha_cdf_new: Vec<f64> = f0.values().iter().map(|&y| mu0.cdf_at(y)).collect();
        let n = alpha_cdf_new.len();
        alpha_cdf_new[0] = 0.0;
        alpha_cdf_new[n - 1] = 1.0;
        for i in 1..n {
            if alpha_cdf_new[i] < alpha_cdf_new[i - 1] {
                alpha_cdf_new[i] = alpha_cdf_new[i - 1];
            }
        }

        Ok(RawStep { alpha_cdf_new, f1, f0, map_slices })
    }

    /// Discrete dual objective `∫psi dmu1 - ∫(psi* * R_{T sigma^2})* dmu0`
    /// for the potential `psi*` whose gradient is `f1`. At the optimum this
    /// equals the maximal covariance with the driving Brownian motion.
    pub fn dual_value(
        &self,
        f1: &MonotoneMap,
        mu0: &DiscreteMeasure,
        mu1: &DiscreteMeasure,
    ) -> Result<f64> {
        let slices = self.prop_map.propagate_backward(f1)?;
        self.dual_value_with_slices(f1, &slices, mu0, mu1)
    }

    /// Same as [`dual_value`](Self::dual_value) but reuses an existing
    /// backward-flow sequence.
    pub fn dual_value_with_slices(
        &self,
        f1: &MonotoneMap,
        map_slices: &[Vec<f64>],
        mu0: &DiscreteMeasure,
        mu1: &DiscreteMeasure,
    ) -> Result<f64> {
        let grid = &self.cfg.grid;
        let dx = grid.dx();
        let n = grid.len();
        let j_ref = n / 2;

        let psi_star = antiderivative(f1, 0.0);

        // Heat flow of the potential: the gradient flows to F0 (backward map
        // slices); the value at a reference point follows
        // d/ds u(s) = (sigma^2/2) d/dy F_s, integrated over the flow duration.
        let sig2 = self.cfg.sigma_bar * self.cfg.sigma_bar;
        let dt = self.cfg.timegrid.dt();
        let m = map_slices.len() - 1;
        let slope_at_ref = |f: &[f64]| (f[j_ref + 1] - f[j_ref - 1]) / (2.0 * dx);
        // slices are ordered t_0..t_M; the flow duration runs from t_M back
        let mut integral = 0.0;
        for (k, slice) in map_slices.iter().enumerate() {
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            integral += w * slope_at_ref(slice) * dt;
        }
        let flowed_ref_value = psi_star.value_at(grid.point(j_ref)) + 0.5 * sig2 * integral;

        let f0 = MonotoneMap::from_nondecreasing(grid.clone(), map_slices[0].clone())?;
        let flowed_potential = {
            let raw = antiderivative(&f0, 0.0);
            let shift = flowed_ref_value - raw.value_at(grid.point(j_ref));
            raw.shifted(shift)
        };

        let map_err = |e: Error| Error::DualEval(e.to_string());

        let mut psi_vals = Vec::with_capacity(n);
        for x in grid.points() {
            psi_vals.push(conjugate_value(&psi_star, x).map_err(map_err)?);
        }
        let term1 = integrate_against(&psi_vals, mu1);

        let mut conj_vals = Vec::with_capacity(n);
        for x in grid.points() {
            conj_vals.push(conjugate_value(&flowed_potential, x).map_err(map_err)?);
        }
        let term2 = integrate_against(&conj_vals, mu0);

        Ok(term1 - term2)
    }

    /// Runs the fixed point from `F1 = Id` until `mse <= tol` or `max_iter`.
    pub fn solve(&self, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<BassSolution> {
        if self.cfg.check_convex_order {
            let report = check_convex_order(mu0, mu1)?;
            if !report.strict {
                return Err(Error::ConvexOrderViolation(format!(
                    "mean_diff={:.3e}, min call gap={:.3e} at K={:.4}",
                    report.mean_diff, report.min_gap, report.min_gap_strike
                )));
            }
        }

        let grid = &self.cfg.grid;
        let k = self.cfg.quantile_points.max(2);
        let target_q = mu0.quantile_curve(k);

        // F1^0 = Id gives F0^0 = Id and alpha0^1 = mu0
        let mut alpha_cdf = mu0.cdf().to_vec();
        let mut trace = Vec::new();
        let mut best: Option<(f64, BassSolution)> = None;

        for it in 1..=self.cfg.max_iter {
            let step = self.step_raw(&alpha_cdf, mu0, mu1)?;
            let mse = mse_via_map_raw(&target_q, grid, &alpha_cdf, &step.f0, k);
            let dual = self.dual_value_with_slices(&step.f1, &step.map_slices, mu0, mu1)?;
            let w_step = measures::w_inf_cdfs(grid, &alpha_cdf, &step.alpha_cdf_new);
            trace.push(IterationRecord { mse_error: mse, dual_value: dual, w_inf_step: w_step });

            if mse <= self.cfg.tol {
                return Ok(BassSolution {
                    alpha0: DiscreteMeasure::from_cdf(grid.clone(), &alpha_cdf)?,
                    f1: step.f1,
                    iterations: it,
                    trace,
                });
            }
            let replace = match &best {
                Some((e, _)) => mse < *e,
                None => true,
            };
            if replace {
                best = Some((
                    mse,
                    BassSolution {
                        alpha0: DiscreteMeasure::from_cdf(grid.clone(), &alpha_cdf)?,
                        f1: step.f1,
                        iterations: it,
                        trace: trace.clone(),
                    },
                ));
            }
            alpha_cdf = step.alpha_cdf_new;
        }

        let (error, mut best) = best.expect("max_iter >= 1");
        best.trace = trace;
        Err(Error::NotConverged {
            iterations: self.cfg.max_iter,
            error,
            best: Box::new(best),
        })
    }
}

/// Mean-square horizontal distance between two CDFs: quantiles compared at
/// `k` uniform levels in `[0, 1]`, endpoints included.
pub fn mse_error(mu0: &DiscreteMeasure, model_mu0: &DiscreteMeasure, k: usize) -> f64 {
    let k = k.max(2);
    let a = mu0.quantile_curve(k);
    let b = model_mu0.quantile_curve(k);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / k as f64
}

/// Solver-internal error: the model time-0 marginal is `(F0)_# alpha0`, whose
/// quantile function is `F0 ∘ q_alpha0` exactly.
pub(crate) fn mse_via_map_raw(
    target_q: &[f64],
    grid: &crate::measures::Grid1D,
    alpha_cdf: &[f64],
    f0: &MonotoneMap,
    k: usize,
) -> f64 {
    let qa = measures::quantile_curve_on(grid, alpha_cdf, k);
    target_q
        .iter()
        .zip(&qa)
        .map(|(t, a)| {
            let m = f0.eval(*a);
            (t - m) * (t - m)
        })
        .sum::<f64>()
        / k as f64
}

fn integrate_against(values: &[f64], mu: &DiscreteMeasure) -> f64 {
    let weighted: Vec<f64> = values.iter().zip(mu.density()).map(|(v, d)| v * d).collect();
    crate::measures::trapz(&weighted, mu.grid().dx())
}
