//! Pricing and hedging of European options in a market where liquidity
//! shocks periodically freeze both trading and the stock price.
//!
//! The liquidity state is a two-state Markov chain (liquid / illiquid). The
//! crate provides
//!
//! * Black-Scholes quotes and the liquidity-adjusted and implied
//!   time-to-maturity ([`bs`]),
//! * linear prices under the minimal martingale and minimal entropy
//!   martingale measures ([`emm`]),
//! * exponential-utility indifference prices, their small risk-aversion
//!   expansion and hedges ([`indiff`]),
//! * a Monte Carlo oracle based on the realized trading time ([`mc`]).

pub mod bs;
pub mod emm;
pub mod error;
pub mod grid;
pub mod indiff;
pub mod mc;
pub mod model;
mod quad;
mod scheme;
pub mod tridiag;

pub use bs::{adjusted_ttm, bs_greeks, bs_price, implied_ttm, BSQuote, BlackScholes, ImpliedTtm};
pub use emm::{linear_price, memm_vs_mmm_spread, single_shock_memm_price, LinearPriceResult};
pub use error::{Error, Result};
pub use grid::{GridSpec, PriceSurface};
pub use indiff::{
    asymptotic_expansion, extrapolate_to_zero, gamma_sweep, hedge_report, solve_buyer, solve_indifference,
    solve_single_shock_buyer, solve_single_shock_linear, solve_writer, AsymptoticBundle, DeltaDecomposition,
    HedgeDetail, HedgeReport, IndiffSolution,
};
pub use mc::{mc_linear_price, mc_realized_ttm, sample_realized_ttm, MCEstimate, McConfig, SingleShockSampler};
pub use model::{
    intensity_curve, merton_factors, payoff_eval, single_shock_factors, survival_factor, IntensityCurve, Measure,
    MertonFactors, ModelParams, Payoff, PayoffKind, Regime, SingleShockFactors,
};
