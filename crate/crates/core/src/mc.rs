//! Monte Carlo oracle for linear prices.
//!
//! The stock is frozen during shocks and the chain is independent of the
//! Brownian motion, so a linear price is the expected Black-Scholes price at
//! the realized time-to-maturity (time spent liquid before expiry). Only the
//! chain is simulated.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bs::BlackScholes;
use crate::error::{Error, Result};
use crate::model::{IntensityCurve, Measure, ModelParams, Payoff, Regime};
use crate::quad::pairwise_sum;

pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// `|x - mean|` in units of the standard error.
    pub fn z_score(&self, x: f64) -> f64 {
        (x - self.mean).abs() / self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Pair every path with one driven by the complementary uniforms.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            seed,
            antithetic: false,
        }
    }
}

/// Uniform source on `(0, 1]`, optionally reflected.
struct Uniforms<'a, R: RngCore> {
    rng: &'a mut R,
    flip: bool,
}

impl<R: RngCore> Uniforms<'_, R> {
    fn next(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        if self.flip {
            u.max(f64::MIN_POSITIVE)
        } else {
            1.0 - u
        }
    }

    fn exp(&mut self) -> f64 {
        -self.next().ln()
    }
}

/// Time of the first jump out of `regime` after `from`, or `None` if it
/// falls after `end`. Constant intensities are sampled exactly, time-varying
/// ones by thinning against the curve's bound.
fn next_jump<R: RngCore>(
    curve: &IntensityCurve,
    regime: Regime,
    from: f64,
    end: f64,
    u: &mut Uniforms<R>,
) -> Option<f64> {
    if curve.is_constant() {
        let rate = curve.leave(regime, from);
        if rate <= 0.0 {
            return None;
        }
        let t = from + u.exp() / rate;
        return (t < end).then_some(t);
    }
    let bound = curve.leave_bound(regime);
    if bound <= 0.0 {
        return None;
    }
    let mut t = from;
    loop {
        t += u.exp() / bound;
        if t >= end {
            return None;
        }
        if u.next() * bound <= curve.leave(regime, t) {
            return Some(t);
        }
    }
}

fn check_horizon(curve: &IntensityCurve, horizon: f64) -> Result<()> {
    if !(horizon >= 0.0 && horizon <= curve.maturity()) {
        return Err(Error::BadInterval {
            start: curve.maturity() - horizon,
            end: curve.maturity(),
            horizon: curve.maturity(),
        });
    }
    Ok(())
}

fn realized_ttm<R: RngCore>(curve: &IntensityCurve, horizon: f64, start: Regime, u: &mut Uniforms<R>) -> f64 {
    let end = curve.maturity();
    let mut t = end - horizon;
    let mut regime = start;
    let mut liquid = 0.0;
    loop {
        let jump = next_jump(curve, regime, t, end, u);
        let stop = jump.unwrap_or(end);
        if regime == Regime::Liquid {
            liquid += stop - t;
        }
        match jump {
            None => return liquid.clamp(0.0, horizon),
            Some(s) => {
                t = s;
                regime = match regime {
                    Regime::Liquid => Regime::Illiquid,
                    Regime::Illiquid => Regime::Liquid,
                };
            }
        }
    }
}

/// Realized time-to-maturity over the last `horizon` years before the
/// curve's maturity, starting in `start`.
pub fn sample_realized_ttm<R: RngCore>(
    curve: &IntensityCurve,
    horizon: f64,
    start: Regime,
    rng: &mut R,
) -> Result<f64> {
    check_horizon(curve, horizon)?;
    Ok(realized_ttm(curve, horizon, start, &mut Uniforms { rng, flip: false }))
}

/// Sampler of the realized time-to-maturity when at most one shock can
/// occur, under the single-shock minimal entropy measure.
#[derive(Debug, Clone, Copy)]
pub struct SingleShockSampler {
    curve: IntensityCurve,
}

impl SingleShockSampler {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Ok(SingleShockSampler {
            curve: IntensityCurve::new(params, Measure::MemmSingleShock)?,
        })
    }

    fn draw<R: RngCore>(&self, horizon: f64, u: &mut Uniforms<R>) -> f64 {
        let end = self.curve.maturity();
        let start = end - horizon;
        let Some(shock) = next_jump(&self.curve, Regime::Liquid, start, end, u) else {
            return horizon;
        };
        let duration = next_jump(&self.curve, Regime::Illiquid, shock, end, u).map_or(f64::INFINITY, |r| r - shock);
        (horizon - duration.min(end - shock)).clamp(0.0, horizon)
    }

    /// Realized time-to-maturity over the last `horizon` years, starting liquid.
    pub fn sample<R: RngCore>(&self, horizon: f64, rng: &mut R) -> Result<f64> {
        check_horizon(&self.curve, horizon)?;
        Ok(self.draw(horizon, &mut Uniforms { rng, flip: false }))
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Averages `f(draw)` over the configured paths. With antithetic pairs each
/// pair counts as one sample for the standard error.
fn estimate<F>(cfg: &McConfig, sample: F) -> Result<MCEstimate>
where
    F: Fn(&mut Uniforms<ChaCha8Rng>) -> f64 + Sync,
{
    if cfg.n_paths < MIN_PATHS {
        return Err(Error::TooFewPaths(cfg.n_paths));
    }
    let units = if cfg.antithetic {
        cfg.n_paths.div_ceil(2)
    } else {
        cfg.n_paths
    };
    let values: Vec<f64> = (0..units as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.seed, k);
            let a = sample(&mut Uniforms {
                rng: &mut rng,
                flip: false,
            });
            if cfg.antithetic {
                let mut rng = path_rng(cfg.seed, k);
                let b = sample(&mut Uniforms {
                    rng: &mut rng,
                    flip: true,
                });
                0.5 * (a + b)
            } else {
                a
            }
        })
        .collect();
    let n = values.len() as f64;
    // shift by the first sample so that constant samples give exactly zero spread
    let shift = values[0];
    let dev: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let offset = pairwise_sum(&dev) / n;
    let mean = shift + offset;
    let sq: Vec<f64> = dev.iter().map(|d| (d - offset) * (d - offset)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    let n_paths = if cfg.antithetic { 2 * units } else { units };
    log::debug!("mc: {n_paths} paths, mean {mean}, sd {}", var.sqrt());
    Ok(MCEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_paths,
        seed: cfg.seed,
    })
}

/// Linear price of one contract at `(0, spot)`, starting liquid, under
/// MMM, MEMM or the single-shock MEMM.
pub fn mc_linear_price(
    params: &ModelParams,
    payoff: &Payoff,
    measure: Measure,
    spot: f64,
    cfg: &McConfig,
) -> Result<MCEstimate> {
    let bs = BlackScholes::from_params(params);
    bs.price(payoff, 0.0, spot)?;
    let unit = payoff.unit();
    let horizon = params.maturity;
    match measure {
        Measure::Mmm | Measure::Memm => {
            let curve = IntensityCurve::new(params, measure)?;
            estimate(cfg, |u| {
                bs.price_unchecked(&unit, realized_ttm(&curve, horizon, Regime::Liquid, u), spot)
            })
        }
        Measure::MemmSingleShock => {
            let sampler = SingleShockSampler::new(params)?;
            estimate(cfg, |u| bs.price_unchecked(&unit, sampler.draw(horizon, u), spot))
        }
        Measure::Physical => Err(Error::Unsupported("linear prices need a martingale measure")),
    }
}

/// Mean realized time-to-maturity over `horizon` years from `start`.
pub fn mc_realized_ttm(
    params: &ModelParams,
    measure: Measure,
    horizon: f64,
    start: Regime,
    cfg: &McConfig,
) -> Result<MCEstimate> {
    let curve = IntensityCurve::new(params, measure)?;
    check_horizon(&curve, horizon)?;
    if measure == Measure::MemmSingleShock {
        if start != Regime::Liquid {
            return Err(Error::Unsupported("the single-shock chain starts liquid"));
        }
        let sampler = SingleShockSampler { curve };
        return estimate(cfg, |u| sampler.draw(horizon, u));
    }
    estimate(cfg, |u| realized_ttm(&curve, horizon, start, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::adjusted_ttm;
    use crate::model::PayoffKind;

    fn dig() -> Payoff {
        Payoff::new(PayoffKind::DigitalCall, 10.0).unwrap()
    }

    #[test]
    fn no_shocks_is_deterministic() {
        let p = ModelParams {
            nu01: 0.0,
            ..ModelParams::default()
        };
        let est = mc_linear_price(&p, &dig(), Measure::Memm, 10.0, &McConfig::new(1000, 7)).unwrap();
        let exact = BlackScholes::from_params(&p).price(&dig(), 1.0, 10.0).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert!((est.mean - exact).abs() < 1e-15);
        let curve = IntensityCurve::new(&p, Measure::Mmm).unwrap();
        let mut rng = path_rng(1, 2);
        assert_eq!(sample_realized_ttm(&curve, 1.0, Regime::Liquid, &mut rng).unwrap(), 1.0);
        let s = SingleShockSampler::new(&p).unwrap();
        assert_eq!(s.sample(0.6, &mut rng).unwrap(), 0.6);
    }

    #[test]
    fn reproducible_and_bounded() {
        let p = ModelParams::default();
        let cfg = McConfig::new(2000, 42);
        let a = mc_linear_price(&p, &dig(), Measure::Memm, 10.0, &cfg).unwrap();
        let b = mc_linear_price(&p, &dig(), Measure::Memm, 10.0, &cfg).unwrap();
        assert_eq!(a, b);
        let curve = IntensityCurve::new(&p, Measure::Memm).unwrap();
        let mut rng = path_rng(3, 0);
        for _ in 0..1000 {
            let t = sample_realized_ttm(&curve, 0.8, Regime::Illiquid, &mut rng).unwrap();
            assert!((0.0..=0.8).contains(&t));
        }
        assert!(sample_realized_ttm(&curve, 1.5, Regime::Liquid, &mut rng).is_err());
    }

    #[test]
    fn too_few_paths() {
        let p = ModelParams::default();
        let r = mc_linear_price(&p, &dig(), Measure::Mmm, 10.0, &McConfig::new(99, 1));
        assert_eq!(r, Err(Error::TooFewPaths(99)));
    }

    #[test]
    fn fast_recovery_loses_no_time() {
        let p = ModelParams {
            nu10: 1e6,
            ..ModelParams::default()
        };
        let est = mc_realized_ttm(&p, Measure::Mmm, 1.0, Regime::Liquid, &McConfig::new(20_000, 5)).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-4);
    }

    #[test]
    fn frequent_shocks_always_hit() {
        let p = ModelParams {
            nu01: 200.0,
            ..ModelParams::default()
        };
        let s = SingleShockSampler::new(&p).unwrap();
        let mut rng = path_rng(9, 0);
        let hits = (0..1000).filter(|_| s.sample(1.0, &mut rng).unwrap() < 1.0).count();
        assert_eq!(hits, 1000);
    }

    #[test]
    fn antithetic_mean_agrees() {
        let p = ModelParams::default();
        let cfg = McConfig {
            antithetic: true,
            ..McConfig::new(100_000, 11)
        };
        let est = mc_realized_ttm(&p, Measure::Mmm, 1.0, Regime::Liquid, &cfg).unwrap();
        let exact = adjusted_ttm(&p, 1.0, Regime::Liquid).unwrap();
        assert!(est.z_score(exact) < 4.0, "{est:?} vs {exact}");
    }
}
