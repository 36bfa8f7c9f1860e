//! Classical Sinkhorn iteration for the entropic optimal transport
//! (Schrödinger) problem, used as a structural reference next to the
//! martingale solvers.
//!
//! The potentials satisfy `mu0 = (g1 * R) f0` and `mu1 = g1 (R * f0)`; the
//! algorithm alternates exact pointwise divisions against heat flows of the
//! other potential, starting from `g1 = 1`. The induced interpolation
//! `mu_t = (g1 * R_{1-t})(f0 * R_t)` matches the endpoints but generally has
//! a drifting mean: the associated process has unit diffusion and a variable
//! drift, unlike the martingale interpolation.

use crate::error::{Error, Result};
use crate::heat::{BoundaryKind, HeatPropagator};
use crate::measures::{self, DiscreteMeasure, Grid1D, TimeGrid};
use crate::mpms_cdf::SolverConfig;

const DEGENERATE_SHARE: f64 = 0.05;

/// Converged Sinkhorn potentials.
#[derive(Debug, Clone)]
pub struct SinkhornState {
    pub f0: Vec<f64>,
    pub g1: Vec<f64>,
    pub grid: Grid1D,
    pub timegrid: TimeGrid,
    pub sigma_bar: f64,
}

/// Per-iteration L1 marginal residuals, measured immediately before the
/// update that would zero them.
#[derive(Debug, Clone)]
pub struct SinkhornTrace {
    pub resid0: Vec<f64>,
    pub resid1: Vec<f64>,
}

pub struct SinkhornSolver {
    cfg: SolverConfig,
    prop: HeatPropagator,
}

impl SinkhornSolver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        let prop = HeatPropagator::new(
            cfg.grid.clone(),
            cfg.timegrid.clone(),
            cfg.sigma_bar,
            BoundaryKind::Density,
        )?;
        Ok(Self { cfg, prop })
    }

    /// Alternates the two marginal fits until both L1 residuals fall below
    /// `tol`. No convex-order requirement.
    pub fn solve(
        &self,
        mu0: &DiscreteMeasure,
        mu1: &DiscreteMeasure,
    ) -> Result<(SinkhornState, SinkhornTrace)> {
        let grid = &self.cfg.grid;
        grid.check_same(mu0.grid())?;
        grid.check_same(mu1.grid())?;
        let n = grid.len();
        let dx = grid.dx();
        let eps0 = zero_eps(mu0);
        let eps1 = zero_eps(mu1);

        let mut g1 = vec![1.0; n];
        let mut f0 = vec![0.0; n];
        let mut resid0 = Vec::new();
        let mut resid1 = Vec::new();

        for it in 0..self.cfg.max_iter {
            // backward flow of g1 gives g(0) = R * g1
            let g0 = self.prop.flow_full(&g1);
            if it > 0 {
                let recon0: Vec<f64> = f0.iter().zip(&g0).map(|(a, b)| a * b).collect();
                resid0.push(l1_distance(&recon0, mu0.density(), dx));
            }
            f0 = divide(mu0.density(), &g0, eps0)?;

            // forward flow of f0 gives f(1) = R * f0
            let f1 = self.prop.flow_full(&f0);
            let recon1: Vec<f64> = g1.iter().zip(&f1).map(|(a, b)| a * b).collect();
            resid1.push(l1_distance(&recon1, mu1.density(), dx));
            g1 = divide(mu1.density(), &f1, eps1)?;

            let done0 = resid0.last().copied().unwrap_or(f64::INFINITY) <= self.cfg.tol;
            let done1 = resid1.last().copied().unwrap_or(f64::INFINITY) <= self.cfg.tol;
            if done0 && done1 {
                return Ok((
                    SinkhornState {
                        f0,
                        g1,
                        grid: grid.clone(),
                        timegrid: self.cfg.timegrid.clone(),
                        sigma_bar: self.cfg.sigma_bar,
                    },
                    SinkhornTrace { resid0, resid1 },
                ));
            }
        }
        Err(Error::Invalid(format!(
            "sinkhorn did not reach tol {} within {} iterations (resid0 {:.3e}, resid1 {:.3e})",
            self.cfg.tol,
            self.cfg.max_iter,
            resid0.last().copied().unwrap_or(f64::NAN),
            resid1.last().copied().unwrap_or(f64::NAN),
        )))
    }

    /// Entropic interpolation `mu_t = (g1 * R_{1-t}) (f0 * R_t)`, normalized.
    /// `t` snaps to the nearest grid time.
    pub fn interpolation(&self, state: &SinkhornState, t: f64) -> Result<DiscreteMeasure> {
        let m = state.timegrid.steps();
        let horizon = state.timegrid.horizon();
        let k = ((t / horizon * m as f64).round() as usize).min(m);
        let f_t = self.prop.flow(&state.f0, k);
        let g_t = self.prop.flow(&state.g1, m - k);
        let density: Vec<f64> = f_t.iter().zip(&g_t).map(|(a, b)| (a * b).max(0.0)).collect();
        DiscreteMeasure::from_density(state.grid.clone(), density)
    }
}

fn zero_eps(mu: &DiscreteMeasure) -> f64 {
    1e-12 * mu.density().iter().cloned().fold(0.0, f64::max)
}

/// Pointwise `num / den` with the degenerate-ratio rule: both below the
/// threshold gives 0; a vanishing denominator against real mass counts
/// toward the degeneracy budget and yields 0 as well.
fn divide(num: &[f64], den: &[f64], eps: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; num.len()];
    let mut degenerate = 0usize;
    for i in 0..num.len() {
        if den[i] < eps {
            if num[i] >= eps {
                degenerate += 1;
            }
            out[i] = 0.0;
        } else {
            out[i] = num[i] / den[i];
        }
    }
    let share = degenerate as f64 / num.len() as f64;
    if share > DEGENERATE_SHARE {
        return Err(Error::DegenerateRatio { share: 100.0 * share });
    }
    Ok(out)
}

fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    measures::trapz(&diff, dx)
}
