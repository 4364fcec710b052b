//! Exponential-utility indifference prices and hedges.
//!
//! Writer prices reuse the buyer equations: writing `m` contracts is buying
//! `-m`, so every solver works with the signed quantity on the payoff and
//! reports prices per contract.

use rayon::prelude::*;

use crate::bs::{adjusted_ttm, implied_ttm, BlackScholes};
use crate::emm::linear_price;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PriceSurface};
use crate::model::{IntensityCurve, Measure, ModelParams, Payoff, Regime, SingleShockFactors};
use crate::scheme::{march_first_order, march_liquid, march_pair, Coupling, Surfaces, MAX_EXPONENT};

/// Per-contract indifference price surfaces of both regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndiffSolution {
    pub p: PriceSurface,
    pub q: PriceSurface,
    pub gamma: f64,
    /// Signed number of contracts bought.
    pub quantity: f64,
}

impl IndiffSolution {
    /// Per-contract price in the liquid regime at `t = 0`.
    pub fn price(&self, spot: f64) -> Result<f64> {
        self.p.quote(spot)
    }
}

fn check_quantity(n: f64) -> Result<()> {
    if !n.is_finite() || n == 0.0 {
        return Err(Error::InvalidParam {
            name: "n",
            value: n,
            reason: "must be finite and nonzero",
        });
    }
    Ok(())
}

fn per_contract(mut v: Vec<f64>, n: f64) -> Vec<f64> {
    if n != 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Indifference price of `payoff.quantity` contracts: a buyer price when the
/// quantity is positive, a writer price when it is negative.
pub fn solve_indifference(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<IndiffSolution> {
    params.validate()?;
    let n = payoff.quantity;
    check_quantity(n)?;
    let curve = IntensityCurve::new(params, Measure::Memm)?;
    let terminal: Vec<f64> = grid.spots().iter().map(|&s| n * payoff.eval(s)).collect();
    let s = march_pair(
        grid,
        params.sigma0,
        &curve,
        Coupling::Exponential { gamma: params.gamma },
        &terminal,
    )?;
    Ok(IndiffSolution {
        p: PriceSurface::from_values(*grid, Regime::Liquid, *payoff, per_contract(s.p, n)),
        q: PriceSurface::from_values(*grid, Regime::Illiquid, *payoff, per_contract(s.q, n)),
        gamma: params.gamma,
        quantity: n,
    })
}

/// Buyer's price per contract for `payoff.quantity > 0` contracts.
pub fn solve_buyer(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<IndiffSolution> {
    if payoff.quantity <= 0.0 {
        return Err(Error::InvalidParam {
            name: "n",
            value: payoff.quantity,
            reason: "buyer quantity must be positive",
        });
    }
    solve_indifference(params, payoff, grid)
}

/// Writer's price per contract for `|payoff.quantity|` written contracts.
pub fn solve_writer(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<IndiffSolution> {
    check_quantity(payoff.quantity)?;
    solve_indifference(params, &payoff.with_quantity(-payoff.quantity.abs()), grid)
}

/// Illiquid-regime values of the single-shock model, which are explicit:
/// the certainty equivalent of the Black-Scholes price at the (random)
/// end of the shock. `gamma = None` gives the risk-neutral limit.
fn single_shock_illiquid(
    params: &ModelParams,
    payoff: &Payoff,
    grid: &GridSpec,
    gamma: Option<f64>,
) -> Result<Vec<f64>> {
    let f = SingleShockFactors::new(params)?;
    let bs = BlackScholes::from_params(params);
    let (d0, nu10) = (f.d0, params.nu10);
    let n = payoff.quantity;
    let unit = payoff.unit();
    let steps = grid.n_time;
    let dt = grid.delta_t;
    let decay = (-nu10 * dt).exp();
    let columns: Vec<Result<Vec<f64>>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|j| {
            let spot = grid.spot(j);
            // Black-Scholes values at time-to-maturity k dt / 2
            let prices: Vec<f64> = (0..=2 * steps)
                .map(|k| n * bs.price_unchecked(&unit, 0.5 * k as f64 * dt, spot))
                .collect();
            // phi(k) = (certainty-equivalent argument, its exponential form)
            let phi = |k: usize| -> Result<(f64, f64)> {
                match gamma {
                    None => Ok((prices[k], 0.0)),
                    Some(g) => {
                        let x = g * prices[k];
                        if x.abs() > MAX_EXPONENT {
                            return Err(Error::Overflow {
                                exponent: x.abs(),
                                time: params.maturity - 0.5 * k as f64 * dt,
                                spot,
                            });
                        }
                        Ok(((-x).exp_m1(), (-x).exp()))
                    }
                }
            };
            let kern = |s: f64, end: f64| nu10 * (-nu10 * (end - s)).exp() * (-d0 * s).exp();
            let mut col = vec![0.0; steps + 1];
            // D accumulates expm1 terms (accurate for small gamma), X the plain
            // exponentials (accurate when the ratio approaches -1).
            let (mut acc_d, mut acc_x, mut acc_w) = (0.0, 0.0, 0.0);
            let terminal = phi(0)?;
            for k in 0..=steps {
                if k > 0 {
                    let a = (k - 1) as f64 * dt;
                    let b = k as f64 * dt;
                    let (ka, km, kb) = (kern(a, b), kern(a + 0.5 * dt, b), kern(b, b));
                    let (pa, pm, pb) = (phi(2 * k - 2)?, phi(2 * k - 1)?, phi(2 * k)?);
                    acc_d = decay * acc_d + dt / 6.0 * (ka * pa.0 + 4.0 * km * pm.0 + kb * pb.0);
                    acc_x = decay * acc_x + dt / 6.0 * (ka * pa.1 + 4.0 * km * pm.1 + kb * pb.1);
                    acc_w = decay * acc_w + dt / 6.0 * (ka + 4.0 * km + kb);
                }
                let survive = (-nu10 * k as f64 * dt).exp();
                let total_w = acc_w + survive;
                let ratio = (acc_d + survive * terminal.0) / total_w;
                col[steps - k] = match gamma {
                    None => ratio,
                    Some(g) if ratio > -0.5 => -ratio.ln_1p() / g,
                    Some(g) => {
                        let mean = (acc_x + survive * terminal.1) / total_w;
                        if mean.is_nan() || mean <= 0.0 {
                            return Err(Error::Overflow {
                                exponent: f64::INFINITY,
                                time: grid.time(steps - k),
                                spot,
                            });
                        }
                        -mean.ln() / g
                    }
                };
            }
            Ok(col)
        })
        .collect();
    let m = grid.n_nodes();
    let mut q = vec![0.0; grid.n_levels() * m];
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            q[i * m + j] = v;
        }
    }
    Ok(q)
}

fn single_shock(
    params: &ModelParams,
    payoff: &Payoff,
    grid: &GridSpec,
    gamma: Option<f64>,
) -> Result<(PriceSurface, PriceSurface)> {
    params.validate()?;
    let n = payoff.quantity;
    check_quantity(n)?;
    let curve = IntensityCurve::new(params, Measure::MemmSingleShock)?;
    let q = single_shock_illiquid(params, payoff, grid, gamma)?;
    let coupling = match gamma {
        None => Coupling::Linear,
        Some(g) => Coupling::Exponential { gamma: g },
    };
    let p = march_liquid(grid, params.sigma0, &curve, coupling, &q)?;
    Ok((
        PriceSurface::from_values(*grid, Regime::Liquid, *payoff, per_contract(p, n)),
        PriceSurface::from_values(*grid, Regime::Illiquid, *payoff, per_contract(q, n)),
    ))
}

/// Per-contract indifference price of the single-shock model (liquid regime).
pub fn solve_single_shock_buyer(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<PriceSurface> {
    Ok(single_shock(params, payoff, grid, Some(params.gamma))?.0)
}

/// Risk-neutral (zero risk aversion) limit of [`solve_single_shock_buyer`]
/// on the same grid.
pub fn solve_single_shock_linear(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<PriceSurface> {
    Ok(single_shock(params, &payoff.unit(), grid, None)?.0)
}

/// Zeroth and first order terms of the indifference price in risk aversion,
/// for one contract.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticBundle {
    pub p0: PriceSurface,
    pub q0: PriceSurface,
    pub p1: PriceSurface,
    pub q1: PriceSurface,
    pub gamma: f64,
    pub quantity: f64,
}

impl AsymptoticBundle {
    /// `p0 + n gamma p1` at `(t, S)`, the first-order per-contract price.
    pub fn first_order(&self, t: f64, spot: f64) -> Result<f64> {
        Ok(self.p0.at(t, spot)? + self.quantity * self.gamma * self.p1.at(t, spot)?)
    }
}

pub fn asymptotic_expansion(params: &ModelParams, payoff: &Payoff, grid: &GridSpec) -> Result<AsymptoticBundle> {
    check_quantity(payoff.quantity)?;
    let lin = linear_price(params, payoff, Measure::Memm, grid)?;
    let curve = IntensityCurve::new(params, Measure::Memm)?;
    let zeroth = Surfaces {
        p: lin.surface_p.values().to_vec(),
        q: lin.surface_q.values().to_vec(),
    };
    let first = march_first_order(grid, params.sigma0, &curve, &zeroth)?;
    let unit = payoff.unit();
    Ok(AsymptoticBundle {
        p1: PriceSurface::from_values(*grid, Regime::Liquid, unit, first.p),
        q1: PriceSurface::from_values(*grid, Regime::Illiquid, unit, first.q),
        p0: lin.surface_p,
        q0: lin.surface_q,
        gamma: params.gamma,
        quantity: payoff.quantity,
    })
}

/// Level of detail of the delta decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedgeDetail {
    /// Base, adjusted-TTM spread, implied-TTM spread and smile terms.
    /// Needs an implied time-to-maturity, so vanilla payoffs only.
    Full,
    /// Base Black-Scholes delta plus a single residual.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaDecomposition {
    Full {
        /// `Delta_BS(T - t, S)`.
        base: f64,
        /// `Delta_BS(adjusted TTM) - Delta_BS(T - t)`.
        adjusted_spread: f64,
        /// `Delta_BS(implied TTM) - Delta_BS(adjusted TTM)`.
        implied_spread: f64,
        /// `dp/dS - Delta_BS(implied TTM)`.
        smile: f64,
    },
    Residual {
        base: f64,
        residual: f64,
    },
}

impl DeltaDecomposition {
    pub fn terms(&self) -> Vec<f64> {
        match *self {
            DeltaDecomposition::Full {
                base,
                adjusted_spread,
                implied_spread,
                smile,
            } => vec![base, adjusted_spread, implied_spread, smile],
            DeltaDecomposition::Residual { base, residual } => vec![base, residual],
        }
    }

    pub fn sum(&self) -> f64 {
        self.terms().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeReport {
    /// `dp/dS` of the per-contract price.
    pub indiff_delta: f64,
    /// Dollar amount in the stock of the Merton investor without the claim.
    pub merton_dollar_position: f64,
    /// Optimal dollar amount in the stock while holding `payoff.quantity` contracts.
    pub stock_dollar_position: f64,
    /// Adjusted time-to-maturity used in the decomposition.
    pub adjusted_ttm: f64,
    /// Implied time-to-maturity, when computed.
    pub implied_ttm: Option<f64>,
    pub decomposition: DeltaDecomposition,
}

pub fn hedge_report(
    params: &ModelParams,
    payoff: &Payoff,
    surface: &PriceSurface,
    t: f64,
    spot: f64,
    detail: HedgeDetail,
) -> Result<HedgeReport> {
    params.validate()?;
    if detail == HedgeDetail::Full && payoff.kind.is_digital() {
        return Err(Error::Unsupported(
            "full delta decomposition needs an implied time-to-maturity, which digitals lack",
        ));
    }
    let ttm = params.maturity - t;
    if !(t >= 0.0 && ttm > 0.0) {
        return Err(Error::OutsideGrid { t, spot });
    }
    let indiff_delta = surface.delta(t, spot)?;
    let bs = BlackScholes::from_params(params);
    let unit = payoff.unit();
    let base = bs.delta(&unit, ttm, spot)?;
    let t_adj = adjusted_ttm(params, ttm, Regime::Liquid)?;
    let (decomposition, implied) = match detail {
        HedgeDetail::Residual => (
            DeltaDecomposition::Residual {
                base,
                residual: indiff_delta - base,
            },
            None,
        ),
        HedgeDetail::Full => {
            let price = surface.at(t, spot)?;
            let t_imp = implied_ttm(params, &unit, spot, price)?.years;
            let d_adj = bs.delta(&unit, t_adj.max(1e-12), spot)?;
            let d_imp = bs.delta(&unit, t_imp.max(1e-12), spot)?;
            (
                DeltaDecomposition::Full {
                    base,
                    adjusted_spread: d_adj - base,
                    implied_spread: d_imp - d_adj,
                    smile: indiff_delta - d_imp,
                },
                Some(t_imp),
            )
        }
    };
    let merton = params.merton_position();
    Ok(HedgeReport {
        indiff_delta,
        merton_dollar_position: merton,
        stock_dollar_position: merton - payoff.quantity * spot * indiff_delta,
        adjusted_ttm: t_adj,
        implied_ttm: implied,
        decomposition,
    })
}

/// Per-contract indifference prices at `(0, spot)` for each risk aversion in
/// `gammas` (positive, increasing). Solves run in parallel.
pub fn gamma_sweep(
    params: &ModelParams,
    payoff: &Payoff,
    grid: &GridSpec,
    gammas: &[f64],
    spot: f64,
) -> Result<Vec<(f64, f64)>> {
    for (k, &g) in gammas.iter().enumerate() {
        if !(g.is_finite() && g > 0.0) || (k > 0 && g <= gammas[k - 1]) {
            return Err(Error::InvalidParam {
                name: "gamma",
                value: g,
                reason: "sweep values must be positive and increasing",
            });
        }
    }
    gammas
        .par_iter()
        .map(|&g| {
            let p = ModelParams { gamma: g, ..*params };
            Ok((g, solve_indifference(&p, payoff, grid)?.price(spot)?))
        })
        .collect()
}

/// Linear extrapolation to `gamma = 0` through the two smallest risk
/// aversions of a sweep.
pub fn extrapolate_to_zero(sweep: &[(f64, f64)]) -> Option<f64> {
    match sweep {
        [(g1, p1), (g2, p2), ..] => Some(p1 - g1 * (p2 - p1) / (g2 - g1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PayoffKind;

    fn params() -> ModelParams {
        ModelParams::default()
    }
    fn call() -> Payoff {
        Payoff::new(PayoffKind::VanillaCall, 10.0).unwrap()
    }
    fn dig() -> Payoff {
        Payoff::new(PayoffKind::DigitalCall, 10.0).unwrap()
    }

    #[test]
    fn writer_dominates_buyer() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 200).unwrap();
        for pay in [call(), dig()] {
            let b = solve_buyer(&p, &pay, &g).unwrap();
            let w = solve_writer(&p, &pay, &g).unwrap();
            for j in b.p.interior() {
                let (x, y) = (b.p.value(0, j), w.p.value(0, j));
                assert!(x <= y + 1e-6 * y.abs() + 1e-12, "{j}: {x} {y}");
            }
        }
        assert!(solve_buyer(&p, &call().with_quantity(-1.0), &g).is_err());
    }

    #[test]
    fn quantity_and_risk_aversion_are_interchangeable() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 200).unwrap();
        let a = solve_buyer(&p, &dig().with_quantity(5.0), &g).unwrap();
        let b = solve_buyer(&ModelParams { gamma: 5.0, ..p }, &dig(), &g).unwrap();
        for (x, y) in a.p.values().iter().zip(b.p.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn digitals_obey_maximum_principle() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 200).unwrap();
        for n in [10.0, -10.0] {
            let s = solve_indifference(&p, &dig().with_quantity(n), &g).unwrap();
            for i in 0..g.n_levels() {
                for j in s.p.interior() {
                    for v in [s.p.value(i, j), s.q.value(i, j)] {
                        assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn first_order_terms_are_nonpositive() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 200).unwrap();
        for pay in [call(), dig()] {
            let a = asymptotic_expansion(&p, &pay, &g).unwrap();
            assert!(a.p1.level(g.n_time).iter().all(|&v| v == 0.0));
            assert!(a.p1.values().iter().chain(a.q1.values()).all(|&v| v <= 1e-10));
        }
    }

    #[test]
    fn single_shock_limit_converges_to_quadrature() {
        let p = params();
        let coarse = GridSpec::new(&p, 10.0, 1000).unwrap();
        let fine = GridSpec::new(&p, 10.0, 2000).unwrap();
        let a = solve_single_shock_linear(&p, &dig(), &coarse).unwrap();
        let b = solve_single_shock_linear(&p, &dig(), &fine).unwrap();
        for s in [8.0, 10.0, 12.0] {
            let exact = crate::emm::single_shock_memm_price(&p, &dig(), 0.0, s).unwrap();
            let (ea, eb) = (a.quote(s).unwrap() - exact, b.quote(s).unwrap() - exact);
            assert!(eb.abs() < 1e-4, "{s}: {eb}");
            let ratio = ea / eb;
            assert!((1.5..2.5).contains(&ratio), "{s}: ratio {ratio}");
        }
    }

    #[test]
    fn hedge_decomposition_sums() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 200).unwrap();
        let s = solve_buyer(&p, &call(), &g).unwrap();
        let r = hedge_report(&p, &call(), &s.p, 0.0, 10.0, HedgeDetail::Full).unwrap();
        assert!((r.decomposition.sum() - r.indiff_delta).abs() < 1e-12);
        assert!((r.merton_dollar_position - 0.06 / 0.09).abs() < 1e-15);
        let d = solve_buyer(&p, &dig(), &g).unwrap();
        assert!(hedge_report(&p, &dig(), &d.p, 0.0, 10.0, HedgeDetail::Full).is_err());
        let r = hedge_report(&p, &dig(), &d.p, 0.0, 10.0, HedgeDetail::Residual).unwrap();
        assert_eq!(r.decomposition.terms().len(), 2);
        assert!(hedge_report(&p, &dig(), &d.p, 0.0, 1e4, HedgeDetail::Residual).is_err());

        let ten = dig().with_quantity(10.0);
        let d10 = solve_buyer(&p, &ten, &g).unwrap();
        let r = hedge_report(&p, &ten, &d10.p, 0.0, 10.0, HedgeDetail::Residual).unwrap();
        let want = r.merton_dollar_position - 10.0 * 10.0 * r.indiff_delta;
        assert!((r.stock_dollar_position - want).abs() < 1e-12);
    }

    #[test]
    fn single_shock_handles_large_exposure() {
        // gamma * n * price reaches ~ 50 at the top of the grid, where the
        // certainty equivalent sits next to the -1 pole of ln1p
        let p = params();
        let g = GridSpec::new(&p, 10.0, 400).unwrap();
        let risky = solve_single_shock_buyer(&p, &call().with_quantity(10.0), &g).unwrap();
        let neutral = solve_single_shock_linear(&p, &call(), &g).unwrap();
        for (a, b) in risky.values().iter().zip(neutral.values()) {
            assert!(a.is_finite());
            assert!(a - b <= 1e-10);
        }
    }

    #[test]
    fn sweep_validates_and_orders() {
        let p = params();
        let g = GridSpec::new(&p, 10.0, 100).unwrap();
        assert!(gamma_sweep(&p, &dig(), &g, &[1.0, 0.5], 10.0).is_err());
        let r = gamma_sweep(&p, &dig(), &g, &[0.01, 1.0], 10.0).unwrap();
        assert!(r[0].1 > r[1].1);
        assert!(extrapolate_to_zero(&r).unwrap() > r[0].1);
        assert_eq!(extrapolate_to_zero(&r[..1]), None);
    }
}
