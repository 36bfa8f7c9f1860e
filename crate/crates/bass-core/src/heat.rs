//! Heat propagation on a uniform grid.
//!
//! Two numerical realizations of `R_t * (.)` live here: an implicit
//! (backward Euler) finite-difference scheme with Dirichlet boundary rows,
//! and direct Gaussian-kernel quadrature. The implicit one-step operator is
//! `A = I - (sigma^2 dt / 2) D2` with identity boundary rows, so each step
//! solves `A u_new = u_old` and pins the endpoint values. Backward Euler is
//! unconditionally monotone, which keeps CDFs nondecreasing and transport
//! maps strictly increasing through the flow.

use crate::error::{Error, Result};
use crate::measures::{Grid1D, TimeGrid};
use crate::transport::MonotoneMap;

/// Boundary treatment of the implicit scheme: which values the identity
/// rows pin at the two grid endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// CDF flow: endpoints pinned to 0 and 1.
    Cdf,
    /// Transport-map flow: endpoints pinned to `z_min` and `z_max`.
    Map,
    /// Density flow: endpoints pinned to 0 and 0.
    Density,
}

/// Precomputed implicit heat operator for one time step, reusable for any
/// number of solves.
#[derive(Debug, Clone)]
pub struct HeatPropagator {
    grid: Grid1D,
    timegrid: TimeGrid,
    sigma_bar: f64,
    boundary: BoundaryKind,
    // Thomas factorization of A (sub-diagonal is constant -lambda)
    sub: f64,
    c_prime: Vec<f64>,
    inv_den: Vec<f64>,
}

impl HeatPropagator {
    pub fn new(grid: Grid1D, timegrid: TimeGrid, sigma_bar: f64, boundary: BoundaryKind) -> Result<Self> {
        if !(sigma_bar.is_finite() && sigma_bar > 0.0) {
            return Err(Error::Invalid(format!("sigma_bar must be positive, got {sigma_bar}")));
        }
        let n = grid.len();
        let dx = grid.dx();
        let lambda = sigma_bar * sigma_bar * timegrid.dt() / (2.0 * dx * dx);
        let mut c_prime = vec![0.0; n];
        let mut inv_den = vec![0.0; n];
        // row 0: [1, 0], interior: [-l, 1+2l, -l], row n-1: [0, 1]
        inv_den[0] = 1.0;
        c_prime[0] = 0.0;
        for i in 1..n {
            let (a_i, b_i, c_i) = if i == n - 1 {
                (0.0, 1.0, 0.0)
            } else {
                (-lambda, 1.0 + 2.0 * lambda, -lambda)
            };
            let den = b_i - a_i * c_prime[i - 1];
            if den.abs() < 1e-300 {
                return Err(Error::SolverFailure { row: i });
            }
            inv_den[i] = 1.0 / den;
            c_prime[i] = c_i * inv_den[i];
        }
        Ok(Self {
            grid,
            timegrid,
            sigma_bar,
            boundary,
            sub: -lambda,
            c_prime,
            inv_den,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn timegrid(&self) -> &TimeGrid {
        &self.timegrid
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    fn pins(&self) -> (f64, f64) {
        match self.boundary {
            BoundaryKind::Cdf => (0.0, 1.0),
            BoundaryKind::Map => (self.grid.z_min(), self.grid.z_max()),
            BoundaryKind::Density => (0.0, 0.0),
        }
    }

    /// One implicit step: pins the boundary entries of `g`, then solves
    /// `A u = g` in place.
    pub fn one_step(&self, g: &mut Vec<f64>) {
        let n = g.len();
        let (lo, hi) = self.pins();
        g[0] = lo;
        g[n - 1] = hi;
        self.solve_raw(g);
    }

    /// Solves `A u = g` in place without touching the boundary entries; the
    /// identity boundary rows keep `u[0] = g[0]` and `u[n-1] = g[n-1]`.
    pub fn solve_raw(&self, g: &mut [f64]) {
        let n = g.len();
        // forward sweep
        g[0] *= self.inv_den[0];
        for i in 1..n {
            let a_i = if i == n - 1 { 0.0 } else { self.sub };
            g[i] = (g[i] - a_i * g[i - 1]) * self.inv_den[i];
        }
        // back substitution
        for i in (0..n - 1).rev() {
            let c = self.c_prime[i];
            g[i] -= c * g[i + 1];
        }
    }

    /// Applies `m` sequential one-step solves.
    pub fn flow(&self, g: &[f64], m: usize) -> Vec<f64> {
        let mut u = g.to_vec();
        for _ in 0..m {
            self.one_step(&mut u);
        }
        u
    }

    /// Full-horizon flow: `M` sequential steps.
    pub fn flow_full(&self, g: &[f64]) -> Vec<f64> {
        self.flow(g, self.timegrid.steps())
    }

    /// M-step solve operator (the composed operator `(A^{-1})^M` applied as
    /// sequential solves, so it matches step-by-step propagation exactly).
    pub fn composed_operator(&self) -> ComposedSolve<'_> {
        ComposedSolve { prop: self }
    }

    /// Forward heat flow of a grid function (CDF or density boundary):
    /// returns the slices `g(t_0), ..., g(t_M)`.
    pub fn propagate_forward(&self, g0: &[f64]) -> Result<Vec<Vec<f64>>> {
        if self.boundary == BoundaryKind::Map {
            return Err(Error::Invalid("forward propagation expects cdf or density boundary".into()));
        }
        if g0.len() != self.grid.len() {
            return Err(Error::Invalid("input length does not match grid".into()));
        }
        let mut out = Vec::with_capacity(self.timegrid.steps() + 1);
        let mut u = g0.to_vec();
        let (lo, hi) = self.pins();
        u[0] = lo;
        *u.last_mut().unwrap() = hi;
        out.push(u.clone());
        for _ in 0..self.timegrid.steps() {
            self.one_step(&mut u);
            out.push(u.clone());
        }
        Ok(out)
    }

    /// Backward heat flow of a transport map: returns the raw grid functions
    /// `F(t_0), ..., F(t_M)` with `F(t_M)` the (boundary-pinned) input.
    ///
    /// The pinned boundary values can locally break monotonicity when the
    /// input's range exceeds the grid; consumers that need a transport map
    /// should repair slices with [`MonotoneMap::from_nondecreasing`]. For
    /// maps whose end values match the pins (every map the solvers produce)
    /// the slices stay monotone up to rounding.
    pub fn propagate_backward(&self, f1: &MonotoneMap) -> Result<Vec<Vec<f64>>> {
        if self.boundary != BoundaryKind::Map {
            return Err(Error::Invalid("backward propagation expects map boundary".into()));
        }
        self.grid.check_same(f1.grid())?;
        let m = self.timegrid.steps();
        let mut rev: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut u = f1.values().to_vec();
        let (lo, hi) = self.pins();
        u[0] = lo;
        *u.last_mut().unwrap() = hi;
        rev.push(u.clone());
        for _ in 0..m {
            self.one_step(&mut u);
            rev.push(u.clone());
        }
        rev.reverse();
        Ok(rev)
    }
}

/// M-step solve operator returned by [`HeatPropagator::composed_operator`].
pub struct ComposedSolve<'a> {
    prop: &'a HeatPropagator,
}

impl ComposedSolve<'_> {
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.prop.flow(g, self.prop.timegrid.steps())
    }
}

/// Gaussian heat kernel `R_t(x) = exp(-x^2/2t) / sqrt(2 pi t)`.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernel {
    pub t: f64,
}

impl HeatKernel {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Invalid(format!("kernel time must be positive, got {t}")));
        }
        Ok(Self { t })
    }

    pub fn density(&self, x: f64) -> f64 {
        (-x * x / (2.0 * self.t)).exp() / (std::f64::consts::TAU * self.t).sqrt()
    }
}

/// Affine tail extension used by [`gauss_convolve`]: beyond each grid end the
/// values continue as `end_value + slope * (x - x_end)`.
#[derive(Debug, Clone, Copy)]
pub struct TailExtension {
    pub left_slope: f64,
    pub right_slope: f64,
}

impl TailExtension {
    /// Continues both ends with their last grid slopes.
    pub fn end_slopes(values: &[f64], grid: &Grid1D) -> Self {
        let n = values.len();
        let dx = grid.dx();
        Self {
            left_slope: (values[1] - values[0]) / dx,
            right_slope: (values[n - 1] - values[n - 2]) / dx,
        }
    }

    /// Continues both ends with their end values (slope 0).
    pub fn flat() -> Self {
        Self { left_slope: 0.0, right_slope: 0.0 }
    }

    pub fn with_slopes(left_slope: f64, right_slope: f64) -> Self {
        Self { left_slope, right_slope }
    }
}

/// Direct quadrature of `(values * R_t)(x_i)`, kernel truncated at `6 sqrt(t)`
/// and weights renormalized to unit mass (so constants and affine functions
/// pass through exactly up to rounding). `tail` supplies the affine
/// continuation of `values` beyond the grid.
pub fn gauss_convolve(values: &[f64], t: f64, grid: &Grid1D, tail: TailExtension) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::Invalid("values length does not match grid".into()));
    }
    let kernel = HeatKernel::new(t)?;
    let reach = 6.0 * t.sqrt();
    let half_width = 0.5 * grid.width();
    if reach > half_width {
        return Err(Error::Bandwidth { reach, half_width });
    }
    let n = grid.len();
    let dx = grid.dx();
    let ks = (reach / dx).ceil() as i64;
    let mut weights = Vec::with_capacity((2 * ks + 1) as usize);
    for j in -ks..=ks {
        let mut w = kernel.density(j as f64 * dx) * dx;
        if j == -ks || j == ks {
            w *= 0.5;
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let last = n as i64 - 1;
    let value_at = |idx: i64| -> f64 {
        if idx < 0 {
            values[0] + tail.left_slope * idx as f64 * dx
        } else if idx > last {
            values[n - 1] + tail.right_slope * (idx - last) as f64 * dx
        } else {
            values[idx as usize]
        }
    };

    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (w, j) in weights.iter().zip(-ks..=ks) {
            acc += w * value_at(i as i64 - j);
        }
        *o = acc;
    }
    Ok(out)
}
