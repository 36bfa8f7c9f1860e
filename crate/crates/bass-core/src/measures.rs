//! Uniform 1D grids and discrete probability measures.
//!
//! A [`DiscreteMeasure`] carries a density and its CDF on a shared uniform
//! grid. The density is the single source of truth: every constructor
//! renormalizes it to unit trapezoid mass and rebuilds the CDF from it, so
//! the two views cannot drift apart. Quantiles are the piecewise-linear
//! inverse of the CDF with leftmost-preimage ties and endpoint clamping.

use crate::error::{Error, Result};
use crate::transport::MonotoneMap;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Mass threshold above which a truncated analytic density is rejected.
pub const TRUNCATION_LIMIT: f64 = 1e-4;

/// Quantile band defining the "interior of the support" for convex-order
/// checks. Tail strikes beyond this band carry so little mass that the
/// discretized call-price gap there is dominated by truncation artifacts.
pub const SUPPORT_QUANTILE_BAND: f64 = 1e-4;

/// Uniform spatial grid on `[z_min, z_max]` with `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    z_min: f64,
    z_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(z_min: f64, z_max: f64, n: usize) -> Result<Self> {
        if !(z_min.is_finite() && z_max.is_finite()) || z_min >= z_max {
            return Err(Error::Invalid(format!(
                "grid bounds must satisfy z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        if n < 3 {
            return Err(Error::Invalid(format!("grid needs at least 3 points, got {n}")));
        }
        Ok(Self { z_min, z_max, n })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.z_max - self.z_min) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    pub fn width(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub(crate) fn describe(&self) -> String {
        format!("[{}, {}] n={}", self.z_min, self.z_max, self.n)
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self == other
    }

    pub(crate) fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.describe(), other.describe()))
        }
    }
}

/// Uniform time grid `t_k = k T / m` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Invalid("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        // exact endpoints
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

/// Analytic marginal families understood by [`density_from_spec`].
#[derive(Debug, Clone)]
pub enum MarginalSpec {
    NormalMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    Lognormal {
        location: f64,
        scale: f64,
    },
    /// Raw density values on the target grid.
    Empirical { values: Vec<f64> },
}

impl MarginalSpec {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        MarginalSpec::NormalMixture {
            weights: vec![1.0],
            means: vec![mean],
            variances: vec![variance],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalSpec::NormalMixture { weights, means, variances } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
                    return Err(Error::Invalid("mixture components must have equal nonzero lengths".into()));
                }
                if weights.iter().any(|&w| w <= 0.0) {
                    return Err(Error::Invalid("mixture weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!("mixture weights sum to {total}, expected 1")));
                }
                if variances.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Invalid("mixture variances must be positive".into()));
                }
                Ok(())
            }
            MarginalSpec::Lognormal { scale, .. } => {
                if *scale <= 0.0 {
                    return Err(Error::Invalid("lognormal scale must be positive".into()));
                }
                Ok(())
            }
            MarginalSpec::Empirical { values } => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Invalid("empirical density must be finite and nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Pointwise analytic density (1/length units).
    pub fn density_at(&self, x: f64) -> f64 {
        match self {
            MarginalSpec::NormalMixture { weights, means, variances } => weights
                .iter()
                .zip(means)
                .zip(variances)
                .map(|((w, m), v)| {
                    let z = x - m;
                    w * (-z * z / (2.0 * v)).exp() / (TWO_PI * v).sqrt()
                })
                .sum(),
            MarginalSpec::Lognormal { location, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - location) / scale;
                    (-0.5 * z * z).exp() / (x * scale * TWO_PI.sqrt())
                }
            }
            MarginalSpec::Empirical { .. } => f64::NAN,
        }
    }
}

/// Probability measure on a uniform grid, carried as density + CDF views.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    grid: Grid1D,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from nonnegative density values, renormalizing to
    /// unit mass. Tiny negative values from finite differencing are floored.
    pub fn from_density(grid: Grid1D, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "density length {} does not match grid size {}",
                density.len(),
                grid.len()
            )));
        }
        let peak = density.iter().cloned().fold(0.0_f64, f64::max);
        let floor = -1e-9 * peak.max(f64::MIN_POSITIVE);
        for v in &mut density {
            if !v.is_finite() {
                return Err(Error::Invalid("density contains non-finite values".into()));
            }
            if *v < 0.0 {
                if *v < floor {
                    return Err(Error::Invalid(format!("density value {v} is negative")));
                }
                *v = 0.0;
            }
        }
        let cdf_raw = cumtrapz(&density, grid.dx());
        let total = *cdf_raw.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Invalid("density has zero or non-finite mass".into()));
        }
        let density: Vec<f64> = density.iter().map(|v| v / total).collect();
        let mut cdf: Vec<f64> = cdf_raw.iter().map(|v| v / total).collect();
        cdf[0] = 0.0;
        let n = cdf.len();
        cdf[n - 1] = 1.0;
        Ok(Self { grid, density, cdf })
    }

    /// Builds a measure from a nondecreasing CDF (endpoints forced to 0 and 1):
    /// density recovered by central differences, then renormalized per the
    /// single-source-of-truth rule.
    pub fn from_cdf(grid: Grid1D, cdf: &[f64]) -> Result<Self> {
        if cdf.len() != grid.len() {
            return Err(Error::Invalid("cdf length does not match grid".into()));
        }
        let density = differentiate(cdf, grid.dx());
        Self::from_density(grid, density)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF at an arbitrary point by linear interpolation, clamped to [0, 1].
    pub fn cdf_at(&self, x: f64) -> f64 {
        interp_clamped(&self.grid, &self.cdf, x)
    }

    pub fn mean(&self) -> f64 {
        let dx = self.grid.dx();
        trapz_with(&self.density, dx, |i, rho| self.grid.point(i) * rho)
    }

    pub fn second_moment(&self) -> f64 {
        let dx = self.grid.dx();
        trapz_with(&self.density, dx, |i, rho| {
            let x = self.grid.point(i);
            x * x * rho
        })
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// Piecewise-linear inverse of the CDF. Flat segments resolve to the
    /// leftmost preimage; `u = 0` and `u = 1` return the grid endpoints.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 0.0 {
            return self.grid.point(0);
        }
        if u >= 1.0 {
            return self.grid.point(self.grid.len() - 1);
        }
        let i = self.cdf.partition_point(|&c| c < u);
        // i >= 1 because cdf[0] = 0 < u
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if c1 <= c0 {
            return self.grid.point(i);
        }
        let theta = (u - c0) / (c1 - c0);
        self.grid.point(i - 1) + theta * self.grid.dx()
    }

    /// Quantiles at `k` uniform levels in `[0, 1]`, endpoints included.
    /// One monotone sweep over the CDF.
    pub fn quantile_curve(&self, k: usize) -> Vec<f64> {
        let levels: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();
        self.quantiles_sorted(&levels)
    }

    /// Quantiles at an already nondecreasing level sequence.
    pub fn quantiles_sorted(&self, levels: &[f64]) -> Vec<f64> {
        quantiles_sorted_on(&self.grid, &self.cdf, levels)
    }

    /// Undiscounted call value `∫ (x - K)^+ dμ` by trapezoid quadrature.
    pub fn call_price(&self, strike: f64) -> f64 {
        let dx = self.grid.dx();
        trapz_with(&self.density, dx, |i, rho| {
            (self.grid.point(i) - strike).max(0.0) * rho
        })
    }

    /// Call values at every grid strike via suffix sums: `C(x_i) = S2_i - x_i S1_i`
    /// with `S1, S2` the suffix trapezoid integrals of `ρ` and `xρ`.
    pub fn call_curve(&self) -> Vec<f64> {
        let n = self.grid.len();
        let dx = self.grid.dx();
        let mut s1 = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let (xa, xb) = (self.grid.point(i), self.grid.point(i + 1));
            let (ra, rb) = (self.density[i], self.density[i + 1]);
            s1[i] = s1[i + 1] + 0.5 * (ra + rb) * dx;
            s2[i] = s2[i + 1] + 0.5 * (xa * ra + xb * rb) * dx;
        }
        (0..n).map(|i| (s2[i] - self.grid.point(i) * s1[i]).max(0.0)).collect()
    }
}

/// Evaluates an analytic marginal on the grid, rejecting grids that clip more
/// than [`TRUNCATION_LIMIT`] of the measure's mass.
pub fn density_from_spec(spec: &MarginalSpec, grid: &Grid1D) -> Result<DiscreteMeasure> {
    density_from_spec_with_limit(spec, grid, TRUNCATION_LIMIT)
}

/// Same as [`density_from_spec`] with an explicit truncation budget.
pub fn density_from_spec_with_limit(
    spec: &MarginalSpec,
    grid: &Grid1D,
    limit: f64,
) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let values: Vec<f64> = match spec {
        MarginalSpec::Empirical { values } => {
            if values.len() != grid.len() {
                return Err(Error::Invalid("empirical density length does not match grid".into()));
            }
            values.clone()
        }
        _ => {
            let raw: Vec<f64> = grid.points().map(|x| spec.density_at(x)).collect();
            let clipped = 1.0 - cumtrapz(&raw, grid.dx()).last().unwrap();
            if clipped > limit {
                return Err(Error::Truncation { clipped, limit });
            }
            raw
        }
    };
    DiscreteMeasure::from_density(grid.clone(), values)
}

/// Result of a convex-order check between two measures on a common grid.
#[derive(Debug, Clone)]
pub struct ConvexOrderReport {
    /// `|∫x dμ0 - ∫x dμ1|`
    pub mean_diff: f64,
    /// Minimum of `C_1(K) - C_0(K)` over interior strikes of μ1's support.
    pub min_gap: f64,
    /// Strike attaining the minimum gap.
    pub min_gap_strike: f64,
    pub strict: bool,
}

/// Checks strict convex order of `m0 <= m1`: equal means (within a scale-free
/// tolerance) and strictly positive call-price gaps at interior strikes.
/// "Interior" means strikes whose μ1-CDF lies in
/// `[SUPPORT_QUANTILE_BAND, 1 - SUPPORT_QUANTILE_BAND]`.
pub fn check_convex_order(m0: &DiscreteMeasure, m1: &DiscreteMeasure) -> Result<ConvexOrderReport> {
    m0.grid().check_same(m1.grid())?;
    let grid = m0.grid();
    let tol_mean = 1e-6 * grid.width();
    let mean_diff = (m0.mean() - m1.mean()).abs();

    let c0 = m0.call_curve();
    let c1 = m1.call_curve();
    let mut min_gap = f64::INFINITY;
    let mut min_gap_strike = f64::NAN;
    for i in 1..grid.len() - 1 {
        let u = m1.cdf()[i];
        if u < SUPPORT_QUANTILE_BAND || u > 1.0 - SUPPORT_QUANTILE_BAND {
            continue;
        }
        let gap = c1[i] - c0[i];
        if gap < min_gap {
            min_gap = gap;
            min_gap_strike = grid.point(i);
        }
    }
    if !min_gap.is_finite() {
        min_gap = 0.0;
    }
    Ok(ConvexOrderReport {
        mean_diff,
        min_gap,
        min_gap_strike,
        strict: mean_diff <= tol_mean && min_gap > 0.0,
    })
}

/// Infinity-Wasserstein distance: sup over a uniform probability grid of the
/// quantile differences. The probability grid has as many points as the
/// spatial grid.
pub fn w_inf_distance(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<f64> {
    m1.grid().check_same(m2.grid())?;
    let k = m1.grid().len();
    let q1 = m1.quantile_curve(k);
    let q2 = m2.quantile_curve(k);
    Ok(q1
        .iter()
        .zip(&q2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Pushforward of `m` under a strictly increasing map `h` on the same grid.
/// The transported CDF satisfies `G(h(x)) = G_m(x)`; the density is recovered
/// by differentiation and renormalization.
pub fn pushforward(m: &DiscreteMeasure, h: &MonotoneMap) -> Result<DiscreteMeasure> {
    m.grid().check_same(h.grid())?;
    let grid = m.grid();
    let n = grid.len();

    let covered = m.cdf_at(h.inverse_clamped(grid.z_max())) - m.cdf_at(h.inverse_clamped(grid.z_min()));
    if 1.0 - covered > TRUNCATION_LIMIT {
        return Err(Error::Truncation {
            clipped: 1.0 - covered,
            limit: TRUNCATION_LIMIT,
        });
    }

    let mut cdf = Vec::with_capacity(n);
    for y in grid.points() {
        let g = if y <= h.values()[0] {
            if y < h.values()[0] { 0.0 } else { m.cdf()[0] }
        } else if y >= h.values()[n - 1] {
            if y > h.values()[n - 1] { 1.0 } else { m.cdf()[n - 1] }
        } else {
            m.cdf_at(h.inverse_clamped(y))
        };
        cdf.push(g);
    }
    // monotone guard against interpolation jitter
    for i in 1..n {
        if cdf[i] < cdf[i - 1] {
            cdf[i] = cdf[i - 1];
        }
    }
    DiscreteMeasure::from_cdf(grid.clone(), &cdf)
}

// ---- shared numeric helpers -------------------------------------------------

/// Piecewise-linear inverse of a raw nondecreasing CDF array at a
/// nondecreasing level sequence: leftmost preimage on flats, `u = 0` and
/// `u = 1` clamp to the grid endpoints. The solvers call this on composed
/// CDFs they carry verbatim, which preserves the exact inverse relation
/// `q(G(x_i)) = x_i` at the nodes.
pub(crate) fn quantiles_sorted_on(grid: &Grid1D, cdf: &[f64], levels: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut out = Vec::with_capacity(levels.len());
    let mut i = 0usize;
    for &u in levels {
        if u <= 0.0 {
            out.push(grid.point(0));
            continue;
        }
        if u >= 1.0 {
            out.push(grid.point(n - 1));
            continue;
        }
        while i < n && cdf[i] < u {
            i += 1;
        }
        debug_assert!(i >= 1 && i < n);
        let (c0, c1) = (cdf[i - 1], cdf[i]);
        if c1 <= c0 {
            out.push(grid.point(i));
        } else {
            let theta = (u - c0) / (c1 - c0);
            out.push(grid.point(i - 1) + theta * grid.dx());
        }
    }
    out
}

/// Quantile curve of a raw CDF at `k` uniform levels, endpoints included.
pub(crate) fn quantile_curve_on(grid: &Grid1D, cdf: &[f64], k: usize) -> Vec<f64> {
    let levels: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();
    quantiles_sorted_on(grid, cdf, &levels)
}

/// W-infinity distance between two raw CDFs on the same grid.
pub(crate) fn w_inf_cdfs(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
    let k = grid.len();
    let qa = quantile_curve_on(grid, a, k);
    let qb = quantile_curve_on(grid, b, k);
    qa.iter().zip(&qb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Trapezoid integral of `values` on a uniform grid.
pub(crate) fn trapz(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dx * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

fn trapz_with(values: &[f64], dx: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    let mapped: Vec<f64> = values.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
    trapz(&mapped, dx)
}

/// Cumulative trapezoid integral, starting at 0.
pub(crate) fn cumtrapz(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dx;
        out.push(acc);
    }
    out
}

/// Central differences inside, one-sided at the ends, floored at zero.
pub(crate) fn differentiate(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    out[0] = (values[1] - values[0]) / dx;
    out[n - 1] = (values[n - 1] - values[n - 2]) / dx;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    for v in &mut out {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Linear interpolation of grid values at `x`, clamped to the end values.
pub(crate) fn interp_clamped(grid: &Grid1D, values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid.z_min() {
        return values[0];
    }
    if x >= grid.z_max() {
        return values[n - 1];
    }
    let pos = (x - grid.z_min()) / grid.dx();
    let i = (pos.floor() as usize).min(n - 2);
    let theta = pos - i as f64;
    values[i] + theta * (values[i + 1] - values[i])
}

/// Linear interpolation that returns `outside` beyond the grid.
pub(crate) fn interp_or(grid: &Grid1D, values: &[f64], x: f64, outside: f64) -> f64 {
    if x < grid.z_min() || x > grid.z_max() {
        return outside;
    }
    interp_clamped(grid, values, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{normal_cdf, wg_mu0, wg_mu1};

    fn gauss(grid: &Grid1D, mean: f64, var: f64) -> DiscreteMeasure {
        density_from_spec(&MarginalSpec::gaussian(mean, var), grid).unwrap()
    }

    #[test]
    fn gaussian_peak_value() {
        let grid = Grid1D::new(-4.0, 4.0, 1000).unwrap();
        let m = gauss(&grid, 0.0, 0.5);
        let peak = m.density().iter().cloned().fold(0.0, f64::max);
        let expected = 1.0 / (TWO_PI * 0.5).sqrt();
        assert!((peak - expected).abs() < 1e-3, "peak {peak} vs {expected}");
    }

    #[test]
    fn wg_mixture_integrates_to_one() {
        let grid = Grid1D::new(-4.0, 4.0, 1000).unwrap();
        let m = wg_mu1(&grid);
        let mass = trapz(m.density(), grid.dx());
        assert!((mass - 1.0).abs() < 1e-9);
        // cdf consistency with its own density
        let rebuilt = cumtrapz(m.density(), grid.dx());
        for (a, b) in rebuilt.iter().zip(m.cdf()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lognormal_mean_matches_closed_form() {
        let grid = Grid1D::new(0.25, 7.0, 1000).unwrap();
        let spec = MarginalSpec::Lognormal { location: 0.05 - 0.5 * 0.04, scale: 0.2 };
        let m = density_from_spec(&spec, &grid).unwrap();
        let expected = (0.05_f64).exp(); // e^{loc + scale^2/2}
        assert!((m.mean() - expected).abs() < 1e-3, "mean {} vs {expected}", m.mean());
    }

    #[test]
    fn truncation_error_fires_for_small_grid() {
        let grid = Grid1D::new(-1.0, 1.0, 200).unwrap();
        let err = density_from_spec(&MarginalSpec::gaussian(0.0, 1.0), &grid);
        assert!(matches!(err, Err(Error::Truncation { .. })));
    }

    #[test]
    fn quantile_uniform_median() {
        let grid = Grid1D::new(0.0, 1.0, 501).unwrap();
        let m = DiscreteMeasure::from_density(grid, vec![1.0; 501]).unwrap();
        assert!((m.quantile(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_normal_symmetry_and_erf_oracle() {
        let grid = Grid1D::new(-4.0, 4.0, 1000).unwrap();
        let m = gauss(&grid, 0.0, 1.0);
        assert!(m.quantile(0.5).abs() < grid.dx());
        // u = Phi(1) => quantile ~ 1.0
        let u = normal_cdf(1.0);
        assert!((m.quantile(u) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn quantile_endpoints_clamp() {
        let grid = Grid1D::new(-4.0, 4.0, 300).unwrap();
        let m = gauss(&grid, 0.0, 0.3);
        assert_eq!(m.quantile(0.0), -4.0);
        assert_eq!(m.quantile(1.0), 4.0);
    }

    #[test]
    fn convex_order_equal_measures_not_strict() {
        let grid = Grid1D::new(-4.0, 4.0, 600).unwrap();
        let m = gauss(&grid, 0.0, 0.5);
        let rep = check_convex_order(&m, &m).unwrap();
        assert!(!rep.strict);
        assert!(rep.min_gap.abs() < 1e-14);
    }

    #[test]
    fn convex_order_wg_pair_strict() {
        let grid = Grid1D::new(-4.0, 4.0, 1000).unwrap();
        let rep = check_convex_order(&wg_mu0(&grid), &wg_mu1(&grid)).unwrap();
        assert!(rep.strict, "mean_diff={} min_gap={}", rep.mean_diff, rep.min_gap);
    }

    #[test]
    fn convex_order_rejects_mean_mismatch() {
        let grid = Grid1D::new(-6.0, 6.0, 800).unwrap();
        let a = gauss(&grid, 0.0, 1.0);
        let b = gauss(&grid, 0.5, 1.0);
        let rep = check_convex_order(&a, &b).unwrap();
        assert!(!rep.strict);
        assert!((rep.mean_diff - 0.5).abs() < 1e-3);
    }

    #[test]
    fn call_price_at_upper_bound_vanishes() {
        let grid = Grid1D::new(-4.0, 4.0, 500).unwrap();
        let m = gauss(&grid, 0.0, 0.5);
        assert_eq!(m.call_price(4.0), 0.0);
    }

    #[test]
    fn call_price_half_normal_oracle() {
        // E[X^+] = 1/sqrt(2 pi) for a standard normal
        let grid = Grid1D::new(-6.0, 6.0, 1500).unwrap();
        let m = gauss(&grid, 0.0, 1.0);
        let expected = 1.0 / TWO_PI.sqrt();
        assert!((m.call_price(0.0) - expected).abs() < 1e-3);
    }

    #[test]
    fn call_price_point_mass() {
        let grid = Grid1D::new(-2.0, 2.0, 2000).unwrap();
        let m = gauss(&grid, 1.0, 1e-4);
        assert!((m.call_price(0.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn call_curve_matches_pointwise_calls() {
        let grid = Grid1D::new(-4.0, 4.0, 400).unwrap();
        let m = wg_mu1(&grid);
        let curve = m.call_curve();
        for i in (0..400).step_by(57) {
            assert!((curve[i] - m.call_price(grid.point(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn w_inf_translation() {
        let grid = Grid1D::new(0.0, 1.5, 601).unwrap();
        let mut d1 = vec![0.0; 601];
        let mut d2 = vec![0.0; 601];
        for (i, x) in grid.points().enumerate() {
            if x <= 1.0 {
                d1[i] = 1.0;
            }
            if x >= 0.5 {
                d2[i] = 1.0;
            }
        }
        let m1 = DiscreteMeasure::from_density(grid.clone(), d1).unwrap();
        let m2 = DiscreteMeasure::from_density(grid, d2).unwrap();
        let d = w_inf_distance(&m1, &m2).unwrap();
        assert!((d - 0.5).abs() < 5e-3, "got {d}");
    }

    #[test]
    fn w_inf_dilation() {
        let grid = Grid1D::new(0.0, 2.0, 801).unwrap();
        let mut d1 = vec![0.0; 801];
        let d2 = vec![1.0; 801];
        for (i, x) in grid.points().enumerate() {
            if x <= 1.0 {
                d1[i] = 1.0;
            }
        }
        let m1 = DiscreteMeasure::from_density(grid.clone(), d1).unwrap();
        let m2 = DiscreteMeasure::from_density(grid, d2).unwrap();
        let d = w_inf_distance(&m1, &m2).unwrap();
        assert!((d - 1.0).abs() < 2.0 * 2.0 / 800.0, "got {d}");
    }

    #[test]
    fn pushforward_identity() {
        let grid = Grid1D::new(-4.0, 4.0, 800).unwrap();
        let m = gauss(&grid, 0.0, 0.5);
        let id = MonotoneMap::identity(grid.clone());
        let p = pushforward(&m, &id).unwrap();
        assert!(w_inf_distance(&m, &p).unwrap() < 2.0 * grid.dx());
    }

    #[test]
    fn pushforward_affine_gaussian() {
        let grid = Grid1D::new(-8.0, 10.0, 3601).unwrap();
        let m = gauss(&grid, 0.0, 1.0);
        let h = MonotoneMap::try_new(grid.clone(), grid.points().map(|x| 2.0 * x + 1.0).collect()).unwrap();
        let p = pushforward(&m, &h).unwrap();
        let target = gauss(&grid, 1.0, 4.0);
        assert!(w_inf_distance(&p, &target).unwrap() < 1e-3);
    }

    #[test]
    fn pushforward_square_map_density() {
        let grid = Grid1D::new(0.0, 1.0, 2001).unwrap();
        let m = DiscreteMeasure::from_density(grid.clone(), vec![1.0; 2001]).unwrap();
        let h = MonotoneMap::try_new(grid.clone(), grid.points().map(|x| x * x).collect()).unwrap();
        let p = pushforward(&m, &h).unwrap();
        // density of X^2 for X ~ U[0,1] is 1/(2 sqrt(y)); at y = 0.25 that is 1.0
        let i = (0.25 / grid.dx()).round() as usize;
        assert!((p.density()[i] - 1.0).abs() < 2e-2, "got {}", p.density()[i]);
    }
}
