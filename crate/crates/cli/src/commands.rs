//! The four subcommands. Each returns a [`Report`] holding CSV text.

use rayon::prelude::*;
use shockprice_core::{
    adjusted_ttm, asymptotic_expansion, bs_greeks, bs_price, hedge_report, implied_ttm, linear_price, mc_linear_price,
    mc_realized_ttm, solve_indifference, solve_single_shock_buyer, DeltaDecomposition, Error, GridSpec, HedgeDetail,
    McConfig, Measure, ModelParams, Payoff, Regime,
};

use crate::config::RunConfig;
use crate::CliError;

/// CSV output plus the number of failed checks (only `converge` fails checks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub csv: String,
    pub failures: usize,
}

/// Formats with 10 significant digits, without exponent for moderate magnitudes.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        let decimals = (9 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.9e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(header).expect("writing to memory");
        Table { w }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.w
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .expect("writing to memory");
    }

    fn finish(self, failures: usize) -> Report {
        let bytes = self.w.into_inner().expect("flushing memory");
        Report {
            csv: String::from_utf8(bytes).expect("csv output is utf-8"),
            failures,
        }
    }
}

fn grid_for(cfg: &RunConfig, params: &ModelParams, n_steps: Option<usize>) -> Result<GridSpec, Error> {
    let n = n_steps.unwrap_or_else(|| (2000.0 * params.maturity).ceil().max(1.0) as usize);
    GridSpec::with_width(params, cfg.strike, n, cfg.width_sd)
}

fn unit_payoff(cfg: &RunConfig) -> Result<Payoff, Error> {
    Payoff::new(cfg.payoff, cfg.strike)
}

/// Per-contract indifference surfaces for every configured contract count,
/// solved in parallel and returned in configuration order.
fn indiff_surfaces(cfg: &RunConfig, grid: &GridSpec) -> Result<Vec<(f64, shockprice_core::IndiffSolution)>, Error> {
    let unit = unit_payoff(cfg)?;
    cfg.contracts
        .par_iter()
        .map(|&n| Ok((n, solve_indifference(&cfg.params, &unit.with_quantity(n), grid)?)))
        .collect()
}

/// Prices at `t = 0` in the liquid regime by every method.
pub fn cmd_price(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = cfg.params;
    let unit = unit_payoff(cfg)?;
    let grid = grid_for(cfg, &params, cfg.n_steps)?;
    let t = params.maturity;
    let t_adj = adjusted_ttm(&params, t, Regime::Liquid)?;
    let (mmm, memm) = rayon::join(
        || linear_price(&params, &unit, Measure::Mmm, &grid),
        || linear_price(&params, &unit, Measure::Memm, &grid),
    );
    let (mmm, memm) = (mmm?, memm?);
    let indiff = indiff_surfaces(cfg, &grid)?;
    let buyers: Vec<f64> = cfg.contracts.iter().copied().filter(|&n| n > 0.0).collect();
    let single: Vec<_> = buyers
        .par_iter()
        .map(|&n| solve_single_shock_buyer(&params, &unit.with_quantity(n), &grid))
        .collect::<Result<_, _>>()?;
    let asym: Vec<_> = cfg
        .contracts
        .par_iter()
        .map(|&n| asymptotic_expansion(&params, &unit.with_quantity(n), &grid))
        .collect::<Result<_, _>>()?;

    let gamma = fmt_sig(params.gamma);
    let mut out = Table::new(&["method", "spot", "price", "n", "gamma"]);
    let plain = |out: &mut Table, method: &str, spot: f64, price: f64| {
        out.row([
            method.into(),
            fmt_sig(spot),
            fmt_sig(price),
            String::new(),
            String::new(),
        ])
    };
    for &s in &cfg.spots {
        plain(&mut out, "BS", s, bs_price(&params, &unit, t, s)?);
    }
    for &s in &cfg.spots {
        plain(&mut out, "AdjBS", s, bs_price(&params, &unit, t_adj, s)?);
    }
    for &s in &cfg.spots {
        plain(&mut out, "MMM", s, mmm.price(s)?);
    }
    for &s in &cfg.spots {
        plain(&mut out, "MEMM", s, memm.price(s)?);
    }
    for (n, sol) in &indiff {
        let method = if *n > 0.0 { "IndiffBuyer" } else { "IndiffWriter" };
        for &s in &cfg.spots {
            out.row([
                method.into(),
                fmt_sig(s),
                fmt_sig(sol.price(s)?),
                fmt_sig(*n),
                gamma.clone(),
            ]);
        }
    }
    for (n, surf) in buyers.iter().zip(&single) {
        for &s in &cfg.spots {
            out.row([
                "SingleShock".into(),
                fmt_sig(s),
                fmt_sig(surf.quote(s)?),
                fmt_sig(*n),
                gamma.clone(),
            ]);
        }
    }
    for (n, bundle) in cfg.contracts.iter().zip(&asym) {
        for &s in &cfg.spots {
            out.row([
                "Asympt1".into(),
                fmt_sig(s),
                fmt_sig(bundle.first_order(0.0, s)?),
                fmt_sig(*n),
                gamma.clone(),
            ]);
        }
    }
    Ok(out.finish(0))
}

/// Adjusted and implied time-to-maturity, over calendar time at a fixed spot
/// and over spot at `t = 0`.
pub fn cmd_ttm(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.payoff.is_digital() {
        return Err(Error::Unsupported(
            "implied time-to-maturity is undefined for digitals: their price is not monotone in maturity",
        )
        .into());
    }
    let params = cfg.params;
    let unit = unit_payoff(cfg)?;
    let grid = grid_for(cfg, &params, cfg.n_steps)?;
    let indiff = indiff_surfaces(cfg, &grid)?;
    let mut out = Table::new(&[
        "sweep",
        "n",
        "t",
        "spot",
        "ttm",
        "adjusted_ttm",
        "adjusted_ttm_illiquid",
        "implied_ttm",
        "low_confidence",
    ]);
    let points: Vec<(&str, f64, f64)> = cfg
        .times
        .iter()
        .map(|&t| ("time", t, cfg.ttm_spot))
        .chain(cfg.spots.iter().map(|&s| ("spot", 0.0, s)))
        .collect();
    for (n, sol) in &indiff {
        for &(sweep, t, s) in &points {
            let ttm = params.maturity - t;
            let a0 = adjusted_ttm(&params, ttm, Regime::Liquid)?;
            let a1 = adjusted_ttm(&params, ttm, Regime::Illiquid)?;
            let price = sol.p.at(t, s)?;
            let (implied, flag) = match implied_ttm(&params, &unit, s, price) {
                Ok(r) => (Some(r.years), r.low_confidence.to_string()),
                Err(Error::NoRoot(why)) => {
                    log::warn!("no implied time-to-maturity for n = {n}, t = {t}, S = {s}: {why}");
                    (None, String::new())
                }
                Err(e) => return Err(e.into()),
            };
            out.row([
                sweep.into(),
                fmt_sig(*n),
                fmt_sig(t),
                fmt_sig(s),
                fmt_sig(ttm),
                fmt_sig(a0),
                fmt_sig(a1),
                opt(implied),
                flag,
            ]);
        }
    }
    Ok(out.finish(0))
}

/// Deltas over the spot sweep at `hedge_time`: Black-Scholes at the true and
/// adjusted time-to-maturity, the indifference delta, the stock position and
/// its decomposition.
pub fn cmd_hedge(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = cfg.params;
    let unit = unit_payoff(cfg)?;
    let grid = grid_for(cfg, &params, cfg.n_steps)?;
    let indiff = indiff_surfaces(cfg, &grid)?;
    let t = cfg.hedge_time;
    let ttm = params.maturity - t;
    let mut out = Table::new(&[
        "n",
        "t",
        "spot",
        "delta_bs",
        "delta_bs_adjusted",
        "indiff_delta",
        "merton_position",
        "stock_position",
        "base",
        "adjusted_spread",
        "implied_spread",
        "smile",
        "residual",
    ]);
    let detail = if unit.kind.is_digital() {
        HedgeDetail::Residual
    } else {
        HedgeDetail::Full
    };
    for (n, sol) in &indiff {
        let payoff = unit.with_quantity(*n);
        for &s in &cfg.spots {
            let report = match hedge_report(&params, &payoff, &sol.p, t, s, detail) {
                Err(Error::NoRoot(why)) => {
                    log::warn!("falling back to the residual decomposition at n = {n}, S = {s}: {why}");
                    hedge_report(&params, &payoff, &sol.p, t, s, HedgeDetail::Residual)?
                }
                r => r?,
            };
            let d_bs = bs_greeks(&params, &unit, ttm, s)?.delta;
            let d_adj = bs_greeks(&params, &unit, report.adjusted_ttm, s)?.delta;
            let terms: [Option<f64>; 5] = match report.decomposition {
                DeltaDecomposition::Full {
                    base,
                    adjusted_spread,
                    implied_spread,
                    smile,
                } => [
                    Some(base),
                    Some(adjusted_spread),
                    Some(implied_spread),
                    Some(smile),
                    None,
                ],
                DeltaDecomposition::Residual { base, residual } => [Some(base), None, None, None, Some(residual)],
            };
            let mut fields = vec![
                fmt_sig(*n),
                fmt_sig(t),
                fmt_sig(s),
                fmt_sig(d_bs),
                fmt_sig(d_adj),
                fmt_sig(report.indiff_delta),
                fmt_sig(report.merton_dollar_position),
                fmt_sig(report.stock_dollar_position),
            ];
            fields.extend(terms.into_iter().map(opt));
            out.row(fields);
        }
    }
    Ok(out.finish(0))
}

/// Grid ladder and PDE-versus-Monte-Carlo checks with a status per row.
pub fn cmd_converge(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = cfg.params;
    let unit = unit_payoff(cfg)?;
    let mut out = Table::new(&[
        "check",
        "measure",
        "regime",
        "spot",
        "n_steps",
        "value",
        "reference",
        "error",
        "std_error",
        "status",
    ]);
    let mut failures = 0;
    let mut status = |ok: bool| {
        if ok {
            "PASS".to_string()
        } else {
            failures += 1;
            "FAIL".to_string()
        }
    };

    // Grid ladder under MEMM: successive quote changes must shrink.
    let ladder: Vec<_> = cfg
        .ladder
        .par_iter()
        .map(|&n| {
            let g = grid_for(cfg, &params, Some(n))?;
            linear_price(&params, &unit, Measure::Memm, &g)
        })
        .collect::<Result<_, Error>>()?;
    for &s in &cfg.spots {
        let quotes: Vec<f64> = ladder.iter().map(|r| r.price(s)).collect::<Result<_, _>>()?;
        for (k, (&n, &v)) in cfg.ladder.iter().zip(&quotes).enumerate() {
            let change = (k > 0).then(|| v - quotes[k - 1]);
            let verdict = if k >= 2 {
                let prev = (quotes[k - 1] - quotes[k - 2]).abs();
                status((v - quotes[k - 1]).abs() <= prev + 1e-12)
            } else {
                "n/a".into()
            };
            out.row([
                "ladder".into(),
                "memm".into(),
                "liquid".into(),
                fmt_sig(s),
                n.to_string(),
                fmt_sig(v),
                k.checked_sub(1).map(|j| fmt_sig(quotes[j])).unwrap_or_default(),
                opt(change),
                String::new(),
                verdict,
            ]);
        }
    }

    // PDE against Monte Carlo of the realized trading time.
    let mc = McConfig {
        n_paths: cfg.paths,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
    };
    let grid = grid_for(cfg, &params, Some(cfg.mc_steps))?;
    for (measure, tag) in [(Measure::Memm, "memm"), (Measure::Mmm, "mmm")] {
        let pde = linear_price(&params, &unit, measure, &grid)?;
        for &s in &cfg.spots {
            let v = pde.price(s)?;
            let est = mc_linear_price(&params, &unit, measure, s, &mc)?;
            out.row([
                "pde_vs_mc".into(),
                tag.into(),
                "liquid".into(),
                fmt_sig(s),
                cfg.mc_steps.to_string(),
                fmt_sig(v),
                fmt_sig(est.mean),
                fmt_sig(v - est.mean),
                fmt_sig(est.std_error),
                status(est.z_score(v).abs() < 3.0),
            ]);
        }
    }

    // Expected realized trading time against its closed form.
    for (regime, tag) in [(Regime::Liquid, "liquid"), (Regime::Illiquid, "illiquid")] {
        let exact = adjusted_ttm(&params, params.maturity, regime)?;
        let est = mc_realized_ttm(&params, Measure::Mmm, params.maturity, regime, &mc)?;
        out.row([
            "realized_ttm".into(),
            "mmm".into(),
            tag.into(),
            String::new(),
            String::new(),
            fmt_sig(exact),
            fmt_sig(est.mean),
            fmt_sig(exact - est.mean),
            fmt_sig(est.std_error),
            status(est.z_score(exact).abs() < 3.0),
        ]);
    }
    Ok(out.finish(failures))
}
