//! Market model: parameters, payoffs, Merton discount factors and the
//! transition intensities of the liquidity chain under the pricing measures.
//!
//! All curves are parameterized by calendar time `t` in `[0, T]`. Conversions
//! to time-to-maturity happen in [`crate::bs`] only.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::simpson;

/// Liquidity regime of the market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Trading is possible and the asset diffuses.
    Liquid = 0,
    /// Trading is suspended and the asset price is frozen.
    Illiquid = 1,
}

impl Regime {
    pub fn from_index(i: usize) -> Option<Regime> {
        match i {
            0 => Some(Regime::Liquid),
            1 => Some(Regime::Illiquid),
            _ => None,
        }
    }
}

/// Market and preference parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Drift of the stock in the liquid regime, per year.
    pub mu0: f64,
    /// Volatility in the liquid regime, per sqrt-year.
    pub sigma0: f64,
    /// Intensity of liquidity shocks (0 -> 1), per year.
    pub nu01: f64,
    /// Intensity of recovery (1 -> 0), per year.
    pub nu10: f64,
    /// Absolute risk aversion of the exponential utility investor.
    pub gamma: f64,
    /// Horizon / option maturity in years.
    pub maturity: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mu0: 0.06,
            sigma0: 0.3,
            nu01: 1.0,
            nu10: 12.0,
            gamma: 1.0,
            maturity: 1.0,
        }
    }
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParam {
            name,
            value,
            reason: "must be finite",
        });
    }
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParam { name, value, reason })
    }
}

impl ModelParams {
    pub fn new(mu0: f64, sigma0: f64, nu01: f64, nu10: f64, gamma: f64, maturity: f64) -> Result<Self> {
        let p = ModelParams {
            mu0,
            sigma0,
            nu01,
            nu10,
            gamma,
            maturity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check("mu0", self.mu0, true, "")?;
        check("sigma0", self.sigma0, self.sigma0 > 0.0, "must be positive")?;
        check("nu01", self.nu01, self.nu01 >= 0.0, "must be nonnegative")?;
        check("nu10", self.nu10, self.nu10 > 0.0, "must be positive")?;
        check("gamma", self.gamma, self.gamma > 0.0, "must be positive")?;
        check("T", self.maturity, self.maturity > 0.0, "must be positive")?;
        Ok(())
    }

    /// `d0 = mu0^2 / (2 sigma0^2)`, the Merton certainty-equivalent rate.
    pub fn d0(&self) -> f64 {
        self.mu0 * self.mu0 / (2.0 * self.sigma0 * self.sigma0)
    }

    /// Sharpe ratio of the stock in the given regime (zero interest rate).
    pub fn sharpe(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Liquid => self.mu0 / self.sigma0,
            Regime::Illiquid => 0.0,
        }
    }

    /// Dollar amount held in the stock by the Merton investor without a claim.
    pub fn merton_position(&self) -> f64 {
        self.mu0 / (self.sigma0 * self.sigma0 * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffKind {
    VanillaCall,
    VanillaPut,
    DigitalCall,
    DigitalPut,
}

impl PayoffKind {
    pub fn name(self) -> &'static str {
        match self {
            PayoffKind::VanillaCall => "vanilla_call",
            PayoffKind::VanillaPut => "vanilla_put",
            PayoffKind::DigitalCall => "digital_call",
            PayoffKind::DigitalPut => "digital_put",
        }
    }

    pub fn is_digital(self) -> bool {
        matches!(self, PayoffKind::DigitalCall | PayoffKind::DigitalPut)
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PayoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla_call" | "call" => Ok(PayoffKind::VanillaCall),
            "vanilla_put" | "put" => Ok(PayoffKind::VanillaPut),
            "digital_call" | "digital" => Ok(PayoffKind::DigitalCall),
            "digital_put" => Ok(PayoffKind::DigitalPut),
            _ => Err(Error::UnknownPayoff(s.to_string())),
        }
    }
}

/// European payoff `n * h(S_T)`.
///
/// `quantity` is the signed number of contracts: positive for a buyer,
/// negative for a writer. [`Payoff::eval`] is always per unit contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub kind: PayoffKind,
    pub strike: f64,
    pub quantity: f64,
}

impl Payoff {
    pub fn new(kind: PayoffKind, strike: f64) -> Result<Self> {
        check("K", strike, strike > 0.0, "must be positive")?;
        Ok(Payoff {
            kind,
            strike,
            quantity: 1.0,
        })
    }

    pub fn with_quantity(mut self, quantity: f64) -> Self {
        self.quantity = quantity;
        self
    }

    pub fn unit(mut self) -> Self {
        self.quantity = 1.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check("K", self.strike, self.strike > 0.0, "must be positive")?;
        check("n", self.quantity, self.quantity != 0.0, "must be nonzero")
    }

    /// Payoff of one contract. Digital indicators are strict, so `h(K) = 0`.
    pub fn eval(&self, spot: f64) -> f64 {
        let k = self.strike;
        match self.kind {
            PayoffKind::VanillaCall => (spot - k).max(0.0),
            PayoffKind::VanillaPut => (k - spot).max(0.0),
            PayoffKind::DigitalCall => {
                if spot > k {
                    1.0
                } else {
                    0.0
                }
            }
            PayoffKind::DigitalPut => {
                if spot < k {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `(inf h, sup h)` over positive spots, per unit contract.
    pub fn range(&self) -> (f64, f64) {
        match self.kind {
            PayoffKind::VanillaCall => (0.0, f64::INFINITY),
            PayoffKind::VanillaPut => (0.0, self.strike),
            PayoffKind::DigitalCall | PayoffKind::DigitalPut => (0.0, 1.0),
        }
    }
}

/// Closed-form solution of `F' = (D - A) F`, `F(T) = (1, 1)`.
///
/// `F_i(t) = -exp(-gamma X) / V_i(t, X)` is the discount factor of the Merton
/// investment problem started in regime `i`. Internally the exponentials are
/// written in time-to-maturity `T - t` so that long horizons do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonFactors {
    pub lambda1: f64,
    pub lambda2: f64,
    pub d0: f64,
    pub maturity: f64,
    // F0 = a1 e^{-l1 tau} + a2 e^{-l2 tau}, F1 = b1 e^{-l1 tau} + b2 e^{-l2 tau}
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
}

impl MertonFactors {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let d0 = params.d0();
        let (nu01, nu10) = (params.nu01, params.nu10);
        let sum = d0 + nu01 + nu10;
        // (d0 + nu01 + nu10)^2 - 4 d0 nu10 written without cancellation
        let disc = ((d0 + nu01 - nu10).powi(2) + 4.0 * nu01 * nu10).sqrt();
        if disc <= f64::EPSILON * sum {
            return Err(Error::Resonance("nu01 = 0 and d0 = nu10 give a double eigenvalue"));
        }
        let lambda1 = 0.5 * (sum + disc);
        let lambda2 = d0 * nu10 / lambda1;
        let gap = lambda1 - lambda2;
        Ok(MertonFactors {
            lambda1,
            lambda2,
            d0,
            maturity: params.maturity,
            a1: (d0 - lambda2) / gap,
            a2: (lambda1 - d0) / gap,
            b1: -lambda2 / gap,
            b2: lambda1 / gap,
        })
    }

    /// `c1` in `F0(t) = c1 e^{lambda1 t} + c2 e^{lambda2 t}`.
    pub fn c1(&self) -> f64 {
        self.a1 * (-self.lambda1 * self.maturity).exp()
    }

    pub fn c2(&self) -> f64 {
        self.a2 * (-self.lambda2 * self.maturity).exp()
    }

    fn exps(&self, t: f64) -> (f64, f64) {
        let tau = self.maturity - t;
        ((-self.lambda1 * tau).exp(), (-self.lambda2 * tau).exp())
    }

    pub fn f0(&self, t: f64) -> f64 {
        let (e1, e2) = self.exps(t);
        self.a1 * e1 + self.a2 * e2
    }

    pub fn f1(&self, t: f64) -> f64 {
        let (e1, e2) = self.exps(t);
        self.b1 * e1 + self.b2 * e2
    }

    /// `F2(t) = exp(-d0 (T - t))`, the factor without liquidity shocks.
    pub fn f2(&self, t: f64) -> f64 {
        (-self.d0 * (self.maturity - t)).exp()
    }

    pub fn f0_prime(&self, t: f64) -> f64 {
        let (e1, e2) = self.exps(t);
        self.lambda1 * self.a1 * e1 + self.lambda2 * self.a2 * e2
    }

    pub fn f1_prime(&self, t: f64) -> f64 {
        let (e1, e2) = self.exps(t);
        self.lambda1 * self.b1 * e1 + self.lambda2 * self.b2 * e2
    }
}

/// Factors of the three-state model where at most one shock can occur
/// (state 2 is an absorbing liquid state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleShockFactors {
    pub d0: f64,
    pub nu01: f64,
    pub nu10: f64,
    pub maturity: f64,
}

impl SingleShockFactors {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let d0 = params.d0();
        let scale = d0 + params.nu01 + params.nu10;
        let tol = 1e-9 * scale;
        if (d0 - params.nu10).abs() <= tol {
            return Err(Error::Resonance("d0 = nu10 in the single-shock factors"));
        }
        if (d0 + params.nu01 - params.nu10).abs() <= tol {
            return Err(Error::Resonance("d0 + nu01 = nu10 in the single-shock factors"));
        }
        Ok(SingleShockFactors {
            d0,
            nu01: params.nu01,
            nu10: params.nu10,
            maturity: params.maturity,
        })
    }

    pub fn f2(&self, t: f64) -> f64 {
        (-self.d0 * (self.maturity - t)).exp()
    }

    pub fn f1(&self, t: f64) -> f64 {
        let tau = self.maturity - t;
        let (d0, nu10) = (self.d0, self.nu10);
        (d0 * (-nu10 * tau).exp() - nu10 * (-d0 * tau).exp()) / (d0 - nu10)
    }

    pub fn f0(&self, t: f64) -> f64 {
        let tau = self.maturity - t;
        let k = self.d0 / (self.d0 + self.nu01 - self.nu10);
        self.f1(t) + k * ((-(self.d0 + self.nu01) * tau).exp() - (-self.nu10 * tau).exp())
    }

    pub fn f2_prime(&self, t: f64) -> f64 {
        self.d0 * self.f2(t)
    }

    pub fn f1_prime(&self, t: f64) -> f64 {
        let tau = self.maturity - t;
        let (d0, nu10) = (self.d0, self.nu10);
        d0 * nu10 * ((-nu10 * tau).exp() - (-d0 * tau).exp()) / (d0 - nu10)
    }

    pub fn f0_prime(&self, t: f64) -> f64 {
        let tau = self.maturity - t;
        let a = self.d0 + self.nu01;
        let k = self.d0 / (a - self.nu10);
        self.f1_prime(t) + k * (a * (-a * tau).exp() - self.nu10 * (-self.nu10 * tau).exp())
    }
}

/// Probability measure under which the liquidity chain is simulated/priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Physical,
    /// Minimal martingale measure: chain generator unchanged.
    Mmm,
    /// Minimal entropy martingale measure of the two-state model.
    Memm,
    /// Minimal entropy martingale measure of the single-shock model.
    MemmSingleShock,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Physical => "physical",
            Measure::Mmm => "MMM",
            Measure::Memm => "MEMM",
            Measure::MemmSingleShock => "MEMM_single_shock",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "physical" | "p" => Ok(Measure::Physical),
            "mmm" => Ok(Measure::Mmm),
            "memm" => Ok(Measure::Memm),
            "memm_single_shock" | "single_shock" => Ok(Measure::MemmSingleShock),
            _ => Err(Error::UnknownMeasure(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CurveShape {
    Constant,
    Memm(MertonFactors),
    SingleShock(SingleShockFactors),
}

/// Samples used to bound the intensities for thinning.
const BOUND_SAMPLES: usize = 2001;
const BOUND_MARGIN: f64 = 1.001;
/// Simpson panels per unit time in [`IntensityCurve::survival`].
const SURVIVAL_PANELS_PER_YEAR: f64 = 200.0;

/// Transition intensities `t -> (nu01(t), nu10(t))` of the liquidity chain
/// under a given measure, with upper bounds usable for thinning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityCurve {
    pub measure: Measure,
    nu01: f64,
    nu10: f64,
    maturity: f64,
    shape: CurveShape,
    bound: (f64, f64),
}

impl IntensityCurve {
    pub fn new(params: &ModelParams, measure: Measure) -> Result<Self> {
        params.validate()?;
        let shape = match measure {
            Measure::Physical | Measure::Mmm => CurveShape::Constant,
            Measure::Memm => CurveShape::Memm(MertonFactors::new(params)?),
            Measure::MemmSingleShock => CurveShape::SingleShock(SingleShockFactors::new(params)?),
        };
        let mut curve = IntensityCurve {
            measure,
            nu01: params.nu01,
            nu10: params.nu10,
            maturity: params.maturity,
            shape,
            bound: (params.nu01, params.nu10),
        };
        if !matches!(shape, CurveShape::Constant) {
            let (mut b01, mut b10) = (0.0f64, 0.0f64);
            for k in 0..BOUND_SAMPLES {
                let t = params.maturity * k as f64 / (BOUND_SAMPLES - 1) as f64;
                let (a, b) = curve.at(t);
                b01 = b01.max(a);
                b10 = b10.max(b);
            }
            curve.bound = (b01 * BOUND_MARGIN, b10 * BOUND_MARGIN);
        }
        Ok(curve)
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.shape, CurveShape::Constant)
    }

    /// `(nu01(t), nu10(t))`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        match &self.shape {
            CurveShape::Constant => (self.nu01, self.nu10),
            CurveShape::Memm(f) => {
                let (f0, f1) = (f.f0(t), f.f1(t));
                (self.nu01 * f1 / f0, self.nu10 * f0 / f1)
            }
            CurveShape::SingleShock(f) => {
                let f1 = f.f1(t);
                (self.nu01 * f1 / f.f0(t), self.nu10 * f.f2(t) / f1)
            }
        }
    }

    /// Intensity of leaving `regime` at time `t`.
    pub fn leave(&self, regime: Regime, t: f64) -> f64 {
        let (a, b) = self.at(t);
        match regime {
            Regime::Liquid => a,
            Regime::Illiquid => b,
        }
    }

    /// Upper bounds `(sup nu01, sup nu10)` on `[0, T]`, with a small margin.
    pub fn bound(&self) -> (f64, f64) {
        self.bound
    }

    pub fn leave_bound(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Liquid => self.bound.0,
            Regime::Illiquid => self.bound.1,
        }
    }

    /// Probability of staying in `regime` throughout `[s, t]`,
    /// `exp(-int_s^t nu(u) du)`, by composite Simpson quadrature.
    pub fn survival(&self, regime: Regime, s: f64, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.maturity;
        if !(s <= t && s >= -slack && t <= self.maturity + slack) || !s.is_finite() || !t.is_finite() {
            return Err(Error::BadInterval {
                start: s,
                end: t,
                horizon: self.maturity,
            });
        }
        if s == t {
            return Ok(1.0);
        }
        let integral = if self.is_constant() {
            self.leave(regime, s) * (t - s)
        } else {
            let panels = (SURVIVAL_PANELS_PER_YEAR * (t - s)).ceil() as usize;
            simpson(|u| self.leave(regime, u), s, t, panels)
        };
        Ok((-integral).exp())
    }
}

pub fn merton_factors(params: &ModelParams) -> Result<MertonFactors> {
    MertonFactors::new(params)
}

pub fn single_shock_factors(params: &ModelParams) -> Result<SingleShockFactors> {
    SingleShockFactors::new(params)
}

pub fn intensity_curve(params: &ModelParams, measure: Measure) -> Result<IntensityCurve> {
    IntensityCurve::new(params, measure)
}

/// `exp(-int_s^t nu(u) du)` for leaving `regime`; see [`IntensityCurve::survival`].
pub fn survival_factor(curve: &IntensityCurve, regime: Regime, s: f64, t: f64) -> Result<f64> {
    curve.survival(regime, s, t)
}

pub fn payoff_eval(payoff: &Payoff, spot: f64) -> f64 {
    payoff.eval(spot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> ModelParams {
        ModelParams::default()
    }

    /// Classical RK4 for a linear system `y' = M y`, integrated backward
    /// from `t = T` with `y(T) = 1`.
    fn rk4_backward(m: &[Vec<f64>], maturity: f64, t_end: f64, steps: usize) -> Vec<f64> {
        let n = m.len();
        let rhs = |y: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| m[i][j] * y[j]).sum()).collect() };
        let mut y = vec![1.0; n];
        let h = -(maturity - t_end) / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&y);
            let y2: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * h * k1[i]).collect();
            let k2 = rhs(&y2);
            let y3: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * h * k2[i]).collect();
            let k3 = rhs(&y3);
            let y4: Vec<f64> = (0..n).map(|i| y[i] + h * k3[i]).collect();
            let k4 = rhs(&y4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    fn d_minus_a(p: &ModelParams) -> Vec<Vec<f64>> {
        let d0 = p.d0();
        vec![vec![d0 + p.nu01, -p.nu01], vec![-p.nu10, p.nu10]]
    }

    #[test]
    fn default_eigenvalues() {
        let f = MertonFactors::new(&base()).unwrap();
        assert_relative_eq!(f.d0, 0.02, epsilon = 1e-15);
        // roots of l^2 - 13.02 l + 0.24 = 0
        for l in [f.lambda1, f.lambda2] {
            assert!((l * l - 13.02 * l + 0.24).abs() < 1e-12);
        }
        assert!((f.lambda1 - 13.0015).abs() < 1e-4);
        assert!((f.lambda2 - 0.0184594).abs() < 1e-7);
    }

    #[test]
    fn closed_form_coefficients_reproduce_f0() {
        let f = MertonFactors::new(&base()).unwrap();
        for t in [0.0, 0.3, 0.9] {
            let direct = f.c1() * (f.lambda1 * t).exp() + f.c2() * (f.lambda2 * t).exp();
            assert_relative_eq!(direct, f.f0(t), max_relative = 1e-13);
        }
    }

    #[test]
    fn terminal_values_are_one() {
        let p = base();
        let f = MertonFactors::new(&p).unwrap();
        assert_relative_eq!(f.f0(1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.f1(1.0), 1.0, epsilon = 1e-15);
        let g = SingleShockFactors::new(&p).unwrap();
        for v in [g.f0(1.0), g.f1(1.0), g.f2(1.0)] {
            assert_relative_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn merton_matches_rk4_oracle() {
        for p in [
            base(),
            ModelParams {
                nu01: 0.3,
                nu10: 2.0,
                mu0: 0.1,
                maturity: 2.0,
                ..base()
            },
            ModelParams { nu01: 0.0, ..base() },
        ] {
            let f = MertonFactors::new(&p).unwrap();
            for t in [0.0, 0.25, 0.5 * p.maturity] {
                let y = rk4_backward(&d_minus_a(&p), p.maturity, t, 20_000);
                assert_relative_eq!(f.f0(t), y[0], max_relative = 1e-11);
                assert_relative_eq!(f.f1(t), y[1], max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn merton_ode_residual_and_ordering() {
        let p = base();
        let f = MertonFactors::new(&p).unwrap();
        assert!(0.0 < f.lambda2 && f.lambda2 < f.d0 && f.d0 < f.lambda1);
        for k in 0..1000 {
            let t = k as f64 / 1000.0;
            let r0 = f.f0_prime(t) - ((f.d0 + p.nu01) * f.f0(t) - p.nu01 * f.f1(t));
            let r1 = f.f1_prime(t) - (-p.nu10 * f.f0(t) + p.nu10 * f.f1(t));
            assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10);
            assert!(f.f1(t) > f.f0(t) && f.f0(t) > f.f2(t), "t = {t}");
        }
    }

    #[test]
    fn no_shocks_reduce_to_merton() {
        let p = ModelParams { nu01: 0.0, ..base() };
        let f = MertonFactors::new(&p).unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert_relative_eq!(f.f0(t), f.f2(t), max_relative = 1e-14);
        }
    }

    #[test]
    fn double_eigenvalue_rejected() {
        let p = ModelParams {
            nu01: 0.0,
            nu10: 0.02,
            ..base()
        };
        assert!(matches!(MertonFactors::new(&p), Err(Error::Resonance(_))));
    }

    #[test]
    fn single_shock_matches_rk4_oracle() {
        for p in [
            base(),
            ModelParams { nu01: 0.0, ..base() },
            ModelParams {
                nu01: 3.0,
                nu10: 1.5,
                ..base()
            },
        ] {
            let g = SingleShockFactors::new(&p).unwrap();
            let d0 = p.d0();
            let m = vec![
                vec![d0 + p.nu01, -p.nu01, 0.0],
                vec![0.0, p.nu10, -p.nu10],
                vec![0.0, 0.0, d0],
            ];
            for t in [0.0, 0.4] {
                let y = rk4_backward(&m, p.maturity, t, 20_000);
                assert_relative_eq!(g.f0(t), y[0], max_relative = 1e-11);
                assert_relative_eq!(g.f1(t), y[1], max_relative = 1e-11);
                assert_relative_eq!(g.f2(t), y[2], max_relative = 1e-11);
            }
            if p.nu01 == 0.0 {
                assert_relative_eq!(g.f0(0.2), g.f2(0.2), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn single_shock_residual_and_ordering() {
        let p = base();
        let g = SingleShockFactors::new(&p).unwrap();
        assert_relative_eq!(g.f2(0.0), 0.980199, epsilon = 1e-6);
        for k in 0..1000 {
            let t = k as f64 / 1000.0;
            let r0 = g.f0_prime(t) - ((g.d0 + p.nu01) * g.f0(t) - p.nu01 * g.f1(t));
            let r1 = g.f1_prime(t) - p.nu10 * (g.f1(t) - g.f2(t));
            assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10);
            assert!(g.f0(t) < g.f1(t) && g.f2(t) < g.f1(t));
        }
    }

    #[test]
    fn single_shock_resonance_rejected() {
        let p = ModelParams { nu10: 0.02, ..base() };
        assert!(matches!(SingleShockFactors::new(&p), Err(Error::Resonance(_))));
        let p = ModelParams { nu10: 1.02, ..base() };
        assert!(matches!(SingleShockFactors::new(&p), Err(Error::Resonance(_))));
    }

    #[test]
    fn intensities() {
        let p = base();
        let mmm = IntensityCurve::new(&p, Measure::Mmm).unwrap();
        assert_eq!(mmm.at(0.3), (1.0, 12.0));
        let memm = IntensityCurve::new(&p, Measure::Memm).unwrap();
        let (a, b) = memm.at(1.0);
        assert_relative_eq!(a, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b, 12.0, epsilon = 1e-13);
        // oracle: RK4 solution of the factor ODE at t = 0
        let y = rk4_backward(&d_minus_a(&p), 1.0, 0.0, 20_000);
        assert_relative_eq!(memm.at(0.0).0, y[1] / y[0], max_relative = 1e-11);
        assert!(memm.at(0.0).0 > 1.0);
        for k in 0..100 {
            let t = k as f64 / 100.0;
            let (a, b) = memm.at(t);
            assert!(a > p.nu01 && b < p.nu10);
            assert!(a <= memm.bound().0 && b <= memm.bound().1);
        }
        assert!("bogus".parse::<Measure>().is_err());
    }

    /// Adaptive Simpson to absolute tolerance, test oracle for survival.
    fn adaptive<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64 + Copy>(
            f: F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn survival_factor() {
        let p = base();
        let mmm = IntensityCurve::new(&p, Measure::Mmm).unwrap();
        assert_eq!(mmm.survival(Regime::Liquid, 0.4, 0.4).unwrap(), 1.0);
        assert_relative_eq!(
            mmm.survival(Regime::Liquid, 0.0, 1.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        let memm = IntensityCurve::new(&p, Measure::Memm).unwrap();
        let b = memm.survival(Regime::Liquid, 0.0, 1.0).unwrap();
        let oracle = (-adaptive(|u| memm.leave(Regime::Liquid, u), 0.0, 1.0, 1e-10)).exp();
        assert_relative_eq!(b, oracle, epsilon = 1e-9);
        assert!(b < (-1.0f64).exp());
        // closed form: nu01 F1/F0 = d0 + nu01 - F0'/F0
        let f = MertonFactors::new(&p).unwrap();
        let closed = (-(f.d0 + p.nu01)).exp() * f.f0(1.0) / f.f0(0.0);
        assert_relative_eq!(b, closed, max_relative = 1e-10);
        assert!(memm.survival(Regime::Liquid, 0.6, 0.2).is_err());
        assert!(memm.survival(Regime::Liquid, 0.0, 1.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn survival_is_monotone_and_multiplicative(s in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let curve = IntensityCurve::new(&base(), Measure::Memm).unwrap();
            let (u, t) = (s + (1.0 - s) * a.min(b), s + (1.0 - s) * a.max(b));
            for r in [Regime::Liquid, Regime::Illiquid] {
                let whole = curve.survival(r, s, t).unwrap();
                let split = curve.survival(r, s, u).unwrap() * curve.survival(r, u, t).unwrap();
                proptest::prop_assert!((whole - split).abs() < 1e-9);
                proptest::prop_assert!(whole <= curve.survival(r, s, u).unwrap() + 1e-15);
                proptest::prop_assert!(whole > 0.0 && whole <= 1.0);
            }
        }
    }

    #[test]
    fn digital_is_strict_at_strike() {
        let c = Payoff::new(PayoffKind::VanillaCall, 10.0).unwrap();
        assert_eq!(c.eval(12.0), 2.0);
        let d = Payoff::new(PayoffKind::DigitalCall, 10.0).unwrap();
        assert_eq!(d.eval(12.0), 1.0);
        assert_eq!(d.eval(10.0), 0.0);
        let dp = Payoff::new(PayoffKind::DigitalPut, 10.0).unwrap();
        assert_eq!(dp.eval(10.0), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.06, 0.0, 1.0, 12.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.06, 0.3, -1.0, 12.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.06, 0.3, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.3, 1.0, 12.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.06, 0.3, 1.0, 12.0, 1.0, 1.0).is_ok());
        assert!(Payoff::new(PayoffKind::VanillaCall, -1.0).is_err());
    }
}
