//! Cross-checks between independent pricing routes.

use shockprice_core::{
    mc_linear_price, single_shock_memm_price, solve_single_shock_linear, GridSpec, McConfig, Measure, ModelParams,
    Payoff, PayoffKind,
};

#[test]
fn single_shock_quadrature_matches_monte_carlo() {
    let p = ModelParams::default();
    let cfg = McConfig::new(400_000, 99);
    for kind in [PayoffKind::VanillaCall, PayoffKind::DigitalCall] {
        let payoff = Payoff::new(kind, 10.0).unwrap();
        for s in [8.0, 10.0, 12.0] {
            let quad = single_shock_memm_price(&p, &payoff, 0.0, s).unwrap();
            let mc = mc_linear_price(&p, &payoff, Measure::MemmSingleShock, s, &cfg).unwrap();
            let z = mc.z_score(quad);
            assert!(
                z.abs() < 3.5,
                "{kind:?} S={s}: quad {quad} mc {} +- {}",
                mc.mean,
                mc.std_error
            );
        }
    }
}

#[test]
fn single_shock_pde_matches_quadrature() {
    let p = ModelParams::default();
    let payoff = Payoff::new(PayoffKind::DigitalCall, 10.0).unwrap();
    let grid = GridSpec::new(&p, 10.0, 4000).unwrap();
    let pde = solve_single_shock_linear(&p, &payoff, &grid).unwrap();
    for s in [8.0, 10.0, 12.0] {
        let quad = single_shock_memm_price(&p, &payoff, 0.0, s).unwrap();
        // first order in time: ~4e-5 at 4000 steps
        assert!((pde.quote(s).unwrap() - quad).abs() < 1e-4, "S={s}");
    }
}
