//! Option-chain ingestion: terminal densities from call prices via the
//! second strike derivative of a natural cubic spline through the quotes,
//! floored at zero, Gaussian-smoothed, and renormalized.

use crate::error::{Error, Result};
use crate::heat::{gauss_convolve, TailExtension};
use crate::measures::{DiscreteMeasure, Grid1D};

/// A single maturity's call quotes, strictly increasing in strike.
#[derive(Debug, Clone)]
pub struct OptionChain {
    pub maturity_label: String,
    pub quotes: Vec<(f64, f64)>,
}

impl OptionChain {
    pub fn new(maturity_label: impl Into<String>, mut quotes: Vec<(f64, f64)>) -> Result<Self> {
        quotes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if quotes.len() < 5 {
            return Err(Error::Invalid(format!(
                "need at least 5 quotes, got {}",
                quotes.len()
            )));
        }
        for (i, w) in quotes.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::DuplicateStrike { strike: w[1].0, line: i + 2 });
            }
        }
        if quotes.iter().any(|(k, p)| !(k.is_finite() && p.is_finite()) || *k <= 0.0 || *p < 0.0) {
            return Err(Error::Invalid("strikes must be positive and prices nonnegative".into()));
        }
        Ok(Self { maturity_label: maturity_label.into(), quotes })
    }

    /// Price monotonicity violations (call prices should not increase in
    /// strike). Reported, not fatal.
    pub fn monotonicity_violations(&self) -> usize {
        self.quotes.windows(2).filter(|w| w[1].1 > w[0].1).count()
    }

    pub fn strike_range(&self) -> (f64, f64) {
        (self.quotes[0].0, self.quotes[self.quotes.len() - 1].0)
    }
}

/// Breeden-Litzenberger settings.
#[derive(Debug, Clone)]
pub struct BLConfig {
    pub grid: Grid1D,
    /// Gaussian smoothing bandwidth (standard deviation, strike units).
    pub smoothing_bandwidth: f64,
    /// Strikes and prices are divided by this before gridding.
    pub rescale_factor: f64,
}

impl BLConfig {
    pub fn new(grid: Grid1D) -> Self {
        let bandwidth = 0.01 * grid.width();
        Self { grid, smoothing_bandwidth: bandwidth, rescale_factor: 1.0 }
    }

    pub fn with_bandwidth(mut self, bandwidth: f64) -> Result<Self> {
        if !(bandwidth >= 0.0 && bandwidth < self.grid.width() / 10.0) {
            return Err(Error::Invalid(format!(
                "bandwidth {bandwidth} must lie in [0, grid width / 10)"
            )));
        }
        self.smoothing_bandwidth = bandwidth;
        Ok(self)
    }

    pub fn with_rescale(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Invalid("rescale factor must be positive".into()));
        }
        self.rescale_factor = factor;
        Ok(self)
    }
}

/// Parses `strike,price` CSV text (header required, one quote per line).
pub fn parse_chain(text: &str) -> Result<OptionChain> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "strike,price" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header 'strike,price', got '{}'", header.trim()),
            })
        }
        None => return Err(Error::Parse { line: 1, message: "empty input".into() }),
    }
    let mut quotes = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let strike = parse_field(parts.next(), line_no, "strike")?;
        let price = parse_field(parts.next(), line_no, "price")?;
        if parts.next().is_some() {
            return Err(Error::Parse { line: line_no, message: "expected exactly two fields".into() });
        }
        if seen.iter().any(|&s| s == strike) {
            return Err(Error::DuplicateStrike { strike, line: line_no });
        }
        seen.push(strike);
        quotes.push((strike, price));
    }
    OptionChain::new("chain", quotes)
}

fn parse_field(field: Option<&str>, line: usize, name: &str) -> Result<f64> {
    let raw = field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {name} field"),
    })?;
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} '{}'", raw.trim()),
    })
}

/// Terminal density from a chain: natural cubic spline through the quotes,
/// analytic second derivative sampled on the grid, negatives floored,
/// Gaussian smoothing, unit-mass renormalization.
pub fn bl_density(chain: &OptionChain, cfg: &BLConfig) -> Result<DiscreteMeasure> {
    let grid = &cfg.grid;
    let knots: Vec<f64> = chain.quotes.iter().map(|(k, _)| k / cfg.rescale_factor).collect();
    let prices: Vec<f64> = chain.quotes.iter().map(|(_, p)| p / cfg.rescale_factor).collect();
    let (k_min, k_max) = (knots[0], knots[knots.len() - 1]);
    if grid.z_min() > k_min || grid.z_max() < k_max {
        return Err(Error::Invalid(format!(
            "grid [{}, {}] does not cover the rescaled strike range [{k_min}, {k_max}]",
            grid.z_min(),
            grid.z_max()
        )));
    }

    let second = natural_spline_second_derivatives(&knots, &prices);

    // The spline's second derivative is linear between knots and zero outside.
    let mut raw: Vec<f64> = Vec::with_capacity(grid.len());
    let mut j = 0usize;
    for x in grid.points() {
        if x < k_min || x > k_max {
            raw.push(0.0);
            continue;
        }
        while j + 2 < knots.len() && knots[j + 1] < x {
            j += 1;
        }
        let h = knots[j + 1] - knots[j];
        let theta = (x - knots[j]) / h;
        raw.push(second[j] * (1.0 - theta) + second[j + 1] * theta);
    }

    let neg: f64 = raw.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let pos: f64 = raw.iter().filter(|v| **v > 0.0).map(|v| *v).sum();
    if pos <= 0.0 || neg > 0.2 * (neg + pos) {
        return Err(Error::NegativeMass { share: 100.0 * neg / (neg + pos).max(f64::MIN_POSITIVE) });
    }
    for v in &mut raw {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let smoothed = if cfg.smoothing_bandwidth > 0.0 {
        let t = cfg.smoothing_bandwidth * cfg.smoothing_bandwidth;
        gauss_convolve(&raw, t, grid, TailExtension::flat())?
    } else {
        raw
    };
    DiscreteMeasure::from_density(grid.clone(), smoothed)
}

/// Natural cubic spline second derivatives at the knots (tridiagonal solve,
/// zero curvature at both ends).
fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // interior system: (h_{i-1} m_{i-1} + 2(h_{i-1}+h_i) m_i + h_i m_{i+1}) = 6 * (slope_i - slope_{i-1})
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // forward elimination on the interior rows only (m[0] = m[n-1] = 0)
    for i in 2..n - 1 {
        let h0 = x[i] - x[i - 1];
        let factor = h0 / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

/// Translates `m1` so that its mean matches `m0`'s, by grid shift with linear
/// re-interpolation. Iterates the shift until the means agree within
/// `1e-6 * grid width`.
pub fn mean_match(m0: &DiscreteMeasure, m1: &DiscreteMeasure) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    m0.grid().check_same(m1.grid())?;
    let grid = m0.grid().clone();
    let tol = 1e-6 * grid.width();
    let target = m0.mean();

    let mut current = m1.clone();
    let mut total_shift = 0.0;
    for _ in 0..8 {
        let delta = target - current.mean();
        if delta.abs() <= 0.5 * tol {
            break;
        }
        total_shift += delta;
        let shifted = shift_density(m1, total_shift)?;
        current = shifted;
    }
    let achieved = (current.mean() - target).abs();
    if achieved > tol {
        return Err(Error::Invalid(format!(
            "mean matching stalled at residual {achieved:.3e} (tol {tol:.3e})"
        )));
    }
    Ok((m0.clone(), current))
}

fn shift_density(m: &DiscreteMeasure, delta: f64) -> Result<DiscreteMeasure> {
    let grid = m.grid();
    // mass pushed off-grid by the shift
    let lost = if delta >= 0.0 {
        1.0 - m.cdf_at(grid.z_max() - delta)
    } else {
        m.cdf_at(grid.z_min() - delta)
    };
    if lost > 1e-4 {
        return Err(Error::Truncation { clipped: lost, limit: 1e-4 });
    }
    let values: Vec<f64> = grid
        .points()
        .map(|x| crate::measures::interp_or(grid, m.density(), x - delta, 0.0))
        .collect();
    DiscreteMeasure::from_density(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{density_from_spec, w_inf_distance, MarginalSpec};
    use crate::testutil::lognormal_call;

    #[test]
    fn parse_two_quotes_fails_minimum() {
        let err = parse_chain("strike,price\n100,12.5\n110,6.2");
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn parse_valid_chain() {
        let chain = parse_chain("strike,price\n100,12.5\n110,6.2\n105,9.0\n120,3.3\n130,1.2").unwrap();
        assert_eq!(chain.quotes.len(), 5);
        // sorted by strike
        let strikes: Vec<f64> = chain.quotes.iter().map(|q| q.0).collect();
        assert_eq!(strikes, vec![100.0, 105.0, 110.0, 120.0, 130.0]);
    }

    #[test]
    fn parse_error_carries_line_number() {
        match parse_chain("strike,price\n100,abc") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_duplicate_strike() {
        let err = parse_chain("strike,price\n100,5\n100,4\n110,3\n120,2\n130,1");
        assert!(matches!(err, Err(Error::DuplicateStrike { .. })));
    }

    #[test]
    fn bl_of_black_scholes_chain_recovers_lognormal() {
        // terminal law exp(N(0, 0.2^2)); 40 strikes across +-4 sigma
        let (loc, scale) = (0.0, 0.2);
        let grid = Grid1D::new(0.3, 2.8, 800).unwrap();
        let quotes: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let z = -4.0 + 8.0 * i as f64 / 39.0;
                let k = (loc + scale * z).exp();
                (k, lognormal_call(loc, scale, k))
            })
            .collect();
        let chain = OptionChain::new("t", quotes).unwrap();
        let cfg = BLConfig::new(grid.clone()).with_bandwidth(0.01).unwrap();
        let dens = bl_density(&chain, &cfg).unwrap();
        let spec = MarginalSpec::Lognormal { location: loc, scale };
        let truth = density_from_spec(&spec, &grid).unwrap();
        let diff: Vec<f64> = dens
            .density()
            .iter()
            .zip(truth.density())
            .map(|(a, b)| (a - b).abs())
            .collect();
        let l1 = crate::measures::trapz(&diff, grid.dx());
        assert!(l1 <= 1e-2, "L1 distance {l1}");
    }

    #[test]
    fn bl_quadratic_price_curve_gives_uniform_density() {
        // C(K) = (A-K)^2 / (4A) has constant second derivative 1/(2A)
        let a = 1.0;
        let grid = Grid1D::new(0.05, 2.0 * a, 600).unwrap();
        let quotes: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let k = 0.08 + (2.0 * a - 0.16) * i as f64 / 29.0;
                (k, (a - k) * (a - k) / (4.0 * a))
            })
            .collect();
        let chain = OptionChain::new("t", quotes).unwrap();
        assert!(chain.monotonicity_violations() > 0); // rising beyond K = A, reported not fatal
        let cfg = BLConfig::new(grid.clone()).with_bandwidth(0.0).unwrap();
        let dens = bl_density(&chain, &cfg).unwrap();
        // uniform in the interior (natural end conditions bend the spline
        // near the first and last knots)
        let inner: Vec<f64> = grid
            .points()
            .zip(dens.density())
            .filter(|(x, _)| (0.5..=1.5).contains(x))
            .map(|(_, d)| *d)
            .collect();
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        for d in &inner {
            assert!((d - mean).abs() < 0.05 * mean, "density {d} vs mean {mean}");
        }
    }

    #[test]
    fn bl_affine_segment_gives_zero_density() {
        // calls of uniform[0.8, 1.6] are affine (identically zero) beyond
        // K = 1.6; the recovered density vanishes on that segment, apart
        // from spline ringing that decays within a few knot spacings of the
        // curvature junction
        let grid = Grid1D::new(0.3, 3.0, 700).unwrap();
        let call = |k: f64| -> f64 {
            if k <= 0.8 {
                1.2 - k
            } else if k < 1.6 {
                (1.6 - k) * (1.6 - k) / 1.6
            } else {
                0.0
            }
        };
        let quotes: Vec<(f64, f64)> = (0..19).map(|i| {
            let k = 0.4 + 0.14 * i as f64;
            (k, call(k))
        }).collect();
        let chain = OptionChain::new("t", quotes).unwrap();
        let cfg = BLConfig::new(grid.clone()).with_bandwidth(0.0).unwrap();
        let dens = bl_density(&chain, &cfg).unwrap();
        let peak = dens.density().iter().cloned().fold(0.0, f64::max);
        for (x, d) in grid.points().zip(dens.density()) {
            if x > 2.2 {
                assert!(*d < 0.02 * peak, "density at {x}: {d} (peak {peak})");
            }
        }
    }

    #[test]
    fn bl_roundtrip_reprices_quotes() {
        let (loc, scale) = (0.0, 0.25);
        let grid = Grid1D::new(0.2, 3.5, 900).unwrap();
        let quotes: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let z = -4.2 + 8.4 * i as f64 / 49.0;
                let k = (loc + scale * z).exp();
                (k, lognormal_call(loc, scale, k))
            })
            .collect();
        let chain = OptionChain::new("t", quotes.clone()).unwrap();
        let cfg = BLConfig::new(grid.clone()).with_bandwidth(0.005).unwrap();
        let dens = bl_density(&chain, &cfg).unwrap();
        for (k, p) in &quotes {
            // deep-tail quotes are dominated by mass beyond the strike range
            if *p < 5e-3 {
                continue;
            }
            let model = dens.call_price(*k);
            assert!(
                (model - p).abs() <= 0.01 * p,
                "strike {k}: model {model} vs quote {p}"
            );
        }
    }

    #[test]
    fn mean_match_identity_when_equal() {
        let grid = Grid1D::new(-6.0, 6.0, 700).unwrap();
        let m = density_from_spec(&MarginalSpec::gaussian(0.0, 1.0), &grid).unwrap();
        let (a, b) = mean_match(&m, &m).unwrap();
        assert!(w_inf_distance(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn mean_match_translates_gaussian() {
        let grid = Grid1D::new(-7.0, 7.0, 1400).unwrap();
        let m0 = density_from_spec(&MarginalSpec::gaussian(0.0, 1.0), &grid).unwrap();
        let m1 = density_from_spec(&MarginalSpec::gaussian(1.0, 1.0), &grid).unwrap();
        let (a, b) = mean_match(&m0, &m1).unwrap();
        assert!((a.mean() - b.mean()).abs() <= 1e-6 * grid.width());
        let target = density_from_spec(&MarginalSpec::gaussian(0.0, 1.0), &grid).unwrap();
        assert!(w_inf_distance(&b, &target).unwrap() < 2.0 * grid.dx());
    }

    #[test]
    fn mean_match_lognormal_pair() {
        let grid = Grid1D::new(0.25, 7.0, 1000).unwrap();
        let m0 = density_from_spec(
            &MarginalSpec::Lognormal { location: 0.03, scale: 0.2 },
            &grid,
        )
        .unwrap();
        let m1 = crate::measures::density_from_spec_with_limit(
            &MarginalSpec::Lognormal { location: -0.06, scale: 0.4 },
            &grid,
            1e-3,
        )
        .unwrap();
        let (a, b) = mean_match(&m0, &m1).unwrap();
        assert!((a.mean() - b.mean()).abs() <= 1e-4);
    }
}
