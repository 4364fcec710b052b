//! Risk-neutral prices under the minimal martingale and minimal entropy
//! martingale measures.

use crate::bs::BlackScholes;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PriceSurface};
use crate::model::{IntensityCurve, Measure, ModelParams, Payoff, Regime, SingleShockFactors};
use crate::quad::simpson_weights;
use crate::scheme::{march_pair, Coupling};

/// Price surfaces of both regimes for a unit contract.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPriceResult {
    pub surface_p: PriceSurface,
    pub surface_q: PriceSurface,
    pub measure: Measure,
    pub grid: GridSpec,
}

impl LinearPriceResult {
    /// Liquid-regime price at `t = 0`.
    pub fn price(&self, spot: f64) -> Result<f64> {
        self.surface_p.quote(spot)
    }
}

/// Solves the coupled linear system for one contract under `measure`
/// (MMM or MEMM) on `grid`.
pub fn linear_price(
    params: &ModelParams,
    payoff: &Payoff,
    measure: Measure,
    grid: &GridSpec,
) -> Result<LinearPriceResult> {
    if !matches!(measure, Measure::Mmm | Measure::Memm) {
        return Err(Error::Unsupported(
            "linear PDE prices are available under MMM and MEMM only",
        ));
    }
    let unit = payoff.unit();
    let curve = IntensityCurve::new(params, measure)?;
    let terminal: Vec<f64> = grid.spots().iter().map(|&s| unit.eval(s)).collect();
    let s = march_pair(grid, params.sigma0, &curve, Coupling::Linear, &terminal)?;
    Ok(LinearPriceResult {
        surface_p: PriceSurface::from_values(*grid, Regime::Liquid, unit, s.p),
        surface_q: PriceSurface::from_values(*grid, Regime::Illiquid, unit, s.q),
        measure,
        grid: *grid,
    })
}

const SS_PANELS: usize = 400;
const SS_TOL: f64 = 1e-8;
const SS_MAX_DOUBLINGS: u32 = 12;

/// Price at `(t, S)` in the liquid regime under the single-shock minimal
/// entropy measure, as the expected Black-Scholes price at the realized
/// time-to-maturity.
pub fn single_shock_memm_price(params: &ModelParams, payoff: &Payoff, t: f64, spot: f64) -> Result<f64> {
    let f = SingleShockFactors::new(params)?;
    let maturity = params.maturity;
    if !(t >= 0.0 && t < maturity) {
        return Err(Error::BadInterval {
            start: t,
            end: maturity,
            horizon: maturity,
        });
    }
    let bs = BlackScholes::from_params(params);
    bs.price(payoff, 0.0, spot)?;
    let unit = payoff.unit();
    let horizon = maturity - t;
    let no_shock = (-(f.d0 + params.nu01) * horizon).exp() * f.f0(maturity) / f.f0(t);
    let p_full = bs.price_unchecked(&unit, horizon, spot);
    if params.nu01 == 0.0 {
        return Ok(no_shock * p_full);
    }
    let mut prev = no_shock * p_full + shocked_part(params, &f, &bs, &unit, t, spot, SS_PANELS);
    let mut change = f64::INFINITY;
    for k in 1..=SS_MAX_DOUBLINGS {
        let next = no_shock * p_full + shocked_part(params, &f, &bs, &unit, t, spot, SS_PANELS << k);
        change = (next - prev).abs();
        prev = next;
        if change < SS_TOL {
            return Ok(prev);
        }
    }
    Err(Error::NoConvergence(change))
}

/// Contribution of paths with a shock, on `panels x panels` Simpson panels.
///
/// The shock start is `tau = t + H v^2` and the shock duration is
/// `(T - tau) u` with `(v, u)` in the unit square, which removes the
/// square-root behavior of the Black-Scholes price at short maturities.
fn shocked_part(
    params: &ModelParams,
    f: &SingleShockFactors,
    bs: &BlackScholes,
    payoff: &Payoff,
    t: f64,
    spot: f64,
    panels: usize,
) -> f64 {
    let (nu01, nu10, d0) = (params.nu01, params.nu10, f.d0);
    let maturity = params.maturity;
    let horizon = maturity - t;
    let w = simpson_weights(1.0, panels);
    let nodes: Vec<f64> = (0..w.len()).map(|k| k as f64 / (w.len() - 1) as f64).collect();
    let f0_t = f.f0(t);
    let mut total = 0.0;
    for (&wv, &v) in w.iter().zip(&nodes) {
        if v == 0.0 {
            continue;
        }
        let tau = t + horizon * v * v;
        let jac = 2.0 * horizon * v;
        let rest = maturity - tau;
        // density of the shock start: nu01 F1(tau) e^{-(d0 + nu01)(tau - t)} / F0(t)
        let start = nu01 * f.f1(tau) * (-(d0 + nu01) * (tau - t)).exp() / f0_t;
        // never recovers before maturity
        let stuck = (-nu10 * rest).exp() * f.f1(maturity) / f.f1(tau) * bs.price_unchecked(payoff, tau - t, spot);
        let mut inner = 0.0;
        if rest > 0.0 {
            for (&wu, &u) in w.iter().zip(&nodes) {
                let d = rest * u;
                // recovery density nu10 F2(tau + d) e^{-nu10 d} / F1(tau)
                let rec = nu10 * f.f2(tau + d) * (-nu10 * d).exp() / f.f1(tau);
                inner += wu * rec * bs.price_unchecked(payoff, horizon - d, spot);
            }
            inner *= rest;
        }
        total += wv * jac * start * (inner + stuck);
    }
    total
}

/// `p_MMM - p_MEMM` at `(0, spot)` on the default grid.
pub fn memm_vs_mmm_spread(params: &ModelParams, payoff: &Payoff, spot: f64) -> Result<f64> {
    let grid = GridSpec::default_for(params, payoff.strike)?;
    let (a, b) = rayon::join(
        || linear_price(params, payoff, Measure::Mmm, &grid),
        || linear_price(params, payoff, Measure::Memm, &grid),
    );
    Ok(a?.price(spot)? - b?.price(spot)?)
}
