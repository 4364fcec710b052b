//! Zero-rate Black-Scholes prices and greeks in the time-to-maturity
//! parametrization, plus the adjusted and implied time-to-maturity.

use libm::erfc;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Payoff, PayoffKind, Regime};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Price and sensitivities of one contract. Time derivatives are taken with
/// respect to time-to-maturity, so a positive `theta_ttm` means the option
/// gains value with more time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSQuote {
    pub price: f64,
    pub delta: f64,
    /// `dP/dT`.
    pub theta_ttm: f64,
    /// `dDelta/dT`.
    pub charm_ttm: f64,
}

/// Outcome of [`implied_ttm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedTtm {
    pub years: f64,
    /// Set when the Black-Scholes price is too flat in maturity near the root
    /// for the target to pin it down (e.g. deep in-the-money calls whose time
    /// value is lost in rounding).
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholes {
    pub sigma: f64,
}

impl BlackScholes {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParam {
                name: "sigma0",
                value: sigma,
                reason: "must be positive",
            });
        }
        Ok(BlackScholes { sigma })
    }

    pub fn from_params(params: &ModelParams) -> Self {
        BlackScholes { sigma: params.sigma0 }
    }

    fn d12(&self, strike: f64, ttm: f64, spot: f64) -> (f64, f64) {
        let sd = self.sigma * ttm.sqrt();
        let d1 = ((spot / strike).ln() + 0.5 * sd * sd) / sd;
        (d1, d1 - sd)
    }

    fn check(ttm: f64, spot: f64) -> Result<()> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(Error::InvalidParam {
                name: "S",
                value: spot,
                reason: "must be positive",
            });
        }
        if ttm.is_nan() || ttm < 0.0 {
            return Err(Error::NegativeTtm(ttm));
        }
        Ok(())
    }

    /// `P_BS(ttm, S)` for one contract; `ttm = 0` gives the payoff.
    pub fn price(&self, payoff: &Payoff, ttm: f64, spot: f64) -> Result<f64> {
        Self::check(ttm, spot)?;
        Ok(self.price_unchecked(payoff, ttm, spot))
    }

    pub(crate) fn price_unchecked(&self, payoff: &Payoff, ttm: f64, spot: f64) -> f64 {
        if ttm == 0.0 {
            return payoff.eval(spot);
        }
        let k = payoff.strike;
        let (d1, d2) = self.d12(k, ttm, spot);
        match payoff.kind {
            PayoffKind::VanillaCall => spot * norm_cdf(d1) - k * norm_cdf(d2),
            PayoffKind::VanillaPut => k * norm_cdf(-d2) - spot * norm_cdf(-d1),
            PayoffKind::DigitalCall => norm_cdf(d2),
            PayoffKind::DigitalPut => norm_cdf(-d2),
        }
    }

    pub fn delta(&self, payoff: &Payoff, ttm: f64, spot: f64) -> Result<f64> {
        Ok(self.greeks(payoff, ttm, spot)?.delta)
    }

    pub fn greeks(&self, payoff: &Payoff, ttm: f64, spot: f64) -> Result<BSQuote> {
        Self::check(ttm, spot)?;
        if ttm == 0.0 {
            return Err(Error::Unsupported("greeks at zero time-to-maturity"));
        }
        let k = payoff.strike;
        let (d1, d2) = self.d12(k, ttm, spot);
        let sqt = ttm.sqrt();
        let price = self.price_unchecked(payoff, ttm, spot);
        let q = match payoff.kind {
            PayoffKind::VanillaCall | PayoffKind::VanillaPut => {
                let call = payoff.kind == PayoffKind::VanillaCall;
                BSQuote {
                    price,
                    delta: if call { norm_cdf(d1) } else { -norm_cdf(-d1) },
                    theta_ttm: spot * norm_pdf(d1) * self.sigma / (2.0 * sqt),
                    charm_ttm: -norm_pdf(d1) * d2 / (2.0 * ttm),
                }
            }
            PayoffKind::DigitalCall | PayoffKind::DigitalPut => {
                let sign = if payoff.kind == PayoffKind::DigitalCall {
                    1.0
                } else {
                    -1.0
                };
                let delta = norm_pdf(d2) / (spot * self.sigma * sqt);
                BSQuote {
                    price,
                    delta: sign * delta,
                    theta_ttm: -sign * norm_pdf(d2) * d1 / (2.0 * ttm),
                    charm_ttm: sign * delta * (d1 * d2 - 1.0) / (2.0 * ttm),
                }
            }
        };
        Ok(q)
    }
}

pub fn bs_price(params: &ModelParams, payoff: &Payoff, ttm: f64, spot: f64) -> Result<f64> {
    BlackScholes::from_params(params).price(payoff, ttm, spot)
}

pub fn bs_greeks(params: &ModelParams, payoff: &Payoff, ttm: f64, spot: f64) -> Result<BSQuote> {
    BlackScholes::from_params(params).greeks(payoff, ttm, spot)
}

/// Expected realized time-to-maturity over `horizon` years under the
/// minimal martingale measure, starting in `regime`.
pub fn adjusted_ttm(params: &ModelParams, horizon: f64, regime: Regime) -> Result<f64> {
    params.validate()?;
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::NegativeTtm(horizon));
    }
    let (nu01, nu10) = (params.nu01, params.nu10);
    let s = nu01 + nu10;
    let sh = s * horizon;
    let v = match regime {
        Regime::Liquid => (nu10 * sh - nu01 * (-sh).exp_m1()) / (s * s),
        Regime::Illiquid => nu10 * (sh + (-sh).exp_m1()) / (s * s),
    };
    Ok(v)
}

/// Price tolerance of the implied time-to-maturity root.
const IMPLIED_PRICE_TOL: f64 = 1e-10;
/// Below this `dP/dT` the root is flagged as low confidence.
const FLAT_THETA: f64 = 1e-8;

/// Black-Scholes maturity reproducing `target` at `spot`, searched by
/// bisection on `[0, 10 T]`.
pub fn implied_ttm(params: &ModelParams, payoff: &Payoff, spot: f64, target: f64) -> Result<ImpliedTtm> {
    params.validate()?;
    if payoff.kind.is_digital() {
        return Err(Error::Unsupported(
            "implied time-to-maturity of a digital is not unique (price is not monotone in maturity)",
        ));
    }
    let bs = BlackScholes::from_params(params);
    BlackScholes::check(0.0, spot)?;
    if !target.is_finite() {
        return Err(Error::NoRoot(format!("target price {target}")));
    }
    // Root function in time value. In the money, the time value is the price
    // of the out-of-the-money mirror option (parity at zero rate), which keeps
    // full relative precision near expiry.
    let mirror = match payoff.kind {
        PayoffKind::VanillaCall if spot > payoff.strike => Payoff {
            kind: PayoffKind::VanillaPut,
            ..*payoff
        },
        PayoffKind::VanillaPut if spot < payoff.strike => Payoff {
            kind: PayoffKind::VanillaCall,
            ..*payoff
        },
        _ => *payoff,
    };
    let intrinsic = payoff.eval(spot);
    let time_value = target - intrinsic;
    let f = |tau: f64| bs.price_unchecked(&mirror, tau, spot) - time_value;
    let mut lo = 0.0;
    let mut hi = 10.0 * params.maturity;
    if time_value < 0.0 {
        return Err(Error::NoRoot(format!(
            "target {target} is below the intrinsic value {intrinsic}"
        )));
    }
    if time_value <= 4.0 * f64::EPSILON * target.abs() {
        // time value within rounding of zero
        let flat = bs.greeks(payoff, 1e-6 * params.maturity, spot)?.theta_ttm < FLAT_THETA;
        return Ok(ImpliedTtm {
            years: 0.0,
            low_confidence: flat && time_value != 0.0,
        });
    }
    if f(hi) < 0.0 {
        return Err(Error::NoRoot(format!(
            "target {target} exceeds the price at maturity {hi}"
        )));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let years = if f(hi).abs() < f(lo).abs() { hi } else { lo };
    let theta = bs.greeks(payoff, years.max(f64::MIN_POSITIVE), spot)?.theta_ttm;
    Ok(ImpliedTtm {
        years,
        low_confidence: theta < FLAT_THETA || f(years).abs() > IMPLIED_PRICE_TOL,
    })
}
