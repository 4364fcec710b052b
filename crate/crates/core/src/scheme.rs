//! Backward time-marching for the coupled liquid/illiquid systems.
//!
//! The liquid-regime equation is stepped implicitly in the diffusion with the
//! coupling term linearized about the previous level; the illiquid-regime
//! equation has no diffusion and is advanced by its exact integrating factor
//! with the liquid value frozen at the new level.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{IntensityCurve, Regime};
use crate::tridiag::thomas;

/// Largest admissible `|gamma (p - q)|` before `exp` is considered overflowing.
pub(crate) const MAX_EXPONENT: f64 = 700.0;

/// How the regime-switch term `nu (q - p)` enters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Coupling {
    /// Linear pricing: `nu (q - p)`.
    Linear,
    /// Exponential-utility buyer: `(nu / gamma)(1 - exp(-gamma (q - p)))`.
    Exponential { gamma: f64 },
}

pub(crate) struct Stepper {
    grid: GridSpec,
    sigma2: f64,
    alpha: f64,
    beta: f64,
    w_lo: f64,
    w_hi: f64,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(grid: &GridSpec, sigma0: f64) -> Self {
        let dz = grid.delta_z;
        let s2 = sigma0 * sigma0;
        let n = grid.n_space - 1;
        Stepper {
            grid: *grid,
            sigma2: s2,
            alpha: 0.5 * s2 * (1.0 / (dz * dz) + 0.5 / dz),
            beta: 0.5 * s2 * (1.0 / (dz * dz) - 0.5 / dz),
            w_lo: (-dz).exp(),
            w_hi: dz.exp(),
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    /// Solves `(1 - dt L + extra) x = rhs` for the interior nodes with zero
    /// second S-derivative at both ends; `extra` and `rhs` span all nodes.
    pub(crate) fn implicit(&mut self, extra: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.grid.n_space;
        let dt = self.grid.delta_t;
        let base = 1.0 + dt * self.sigma2 / (self.grid.delta_z * self.grid.delta_z);
        let lo = -dt * self.alpha;
        let up = -dt * self.beta;
        for k in 0..m - 1 {
            let j = k + 1;
            self.sub[k] = lo;
            self.sup[k] = up;
            self.diag[k] = base + extra[j];
            self.rhs[k] = rhs[j];
        }
        // eliminate p_0 = (1 + w) p_1 - w p_2 and the mirror image at the top
        self.diag[0] += lo * (1.0 + self.w_lo);
        self.sup[0] -= lo * self.w_lo;
        let last = m - 2;
        self.diag[last] += up * (1.0 + self.w_hi);
        self.sub[last] -= up * self.w_hi;
        thomas(&self.sub, &self.diag, &self.sup, &mut self.rhs, &mut self.scratch).map_err(|e| match e {
            Error::PivotBreakdown(k) => Error::PivotBreakdown(k + 1),
            e => e,
        })?;
        out[1..m].copy_from_slice(&self.rhs);
        out[0] = (1.0 + self.w_lo) * out[1] - self.w_lo * out[2];
        out[m] = (1.0 + self.w_hi) * out[m - 1] - self.w_hi * out[m - 2];
        Ok(())
    }
}

/// Full surfaces stored level by level, `t = 0` first.
pub(crate) struct Surfaces {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn check_finite(level: usize, row: &[f64]) -> Result<()> {
    match row.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { level, node }),
        None => Ok(()),
    }
}

fn overflow(grid: &GridSpec, exponent: f64, i: usize, j: usize) -> Error {
    Error::Overflow {
        exponent,
        time: grid.time(i),
        spot: grid.spot(j),
    }
}

/// Implicit liquid-regime step from level `i + 1` to `i` against the
/// illiquid values `q_next` (known at level `i + 1`).
#[allow(clippy::too_many_arguments)]
fn liquid_step(
    stepper: &mut Stepper,
    coupling: Coupling,
    nu: f64,
    i: usize,
    p_next: &[f64],
    q_next: &[f64],
    extra: &mut [f64],
    rhs: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let grid = stepper.grid;
    let dt = grid.delta_t;
    match coupling {
        Coupling::Linear => {
            for j in 0..p_next.len() {
                extra[j] = dt * nu;
                rhs[j] = p_next[j] + dt * nu * q_next[j];
            }
        }
        Coupling::Exponential { gamma } => {
            for j in 0..p_next.len() {
                let x = gamma * (p_next[j] - q_next[j]);
                if x.abs() > MAX_EXPONENT {
                    return Err(overflow(&grid, x.abs(), i + 1, j));
                }
                let e = x.exp();
                extra[j] = dt * nu * e;
                rhs[j] = p_next[j] + dt * nu * (-x.exp_m1() / gamma + e * p_next[j]);
            }
        }
    }
    stepper.implicit(extra, rhs, out)
}

/// Exact integrating-factor step of the illiquid equation over one interval
/// with survival probability `b`.
fn illiquid_step(
    grid: &GridSpec,
    coupling: Coupling,
    b: f64,
    i: usize,
    p_now: &[f64],
    q_next: &[f64],
    out: &mut [f64],
) -> Result<()> {
    match coupling {
        Coupling::Linear => {
            for j in 0..p_now.len() {
                out[j] = p_now[j] + b * (q_next[j] - p_now[j]);
            }
        }
        Coupling::Exponential { gamma } => {
            for j in 0..p_now.len() {
                let x = -gamma * (q_next[j] - p_now[j]);
                if x.abs() > MAX_EXPONENT {
                    return Err(overflow(grid, x.abs(), i, j));
                }
                out[j] = p_now[j] - (b * x.exp_m1()).ln_1p() / gamma;
            }
        }
    }
    Ok(())
}

/// Marches the pair `(p, q)` from `p(T) = q(T) = terminal` to `t = 0`.
pub(crate) fn march_pair(
    grid: &GridSpec,
    sigma0: f64,
    curve: &IntensityCurve,
    coupling: Coupling,
    terminal: &[f64],
) -> Result<Surfaces> {
    let m = grid.n_nodes();
    let levels = grid.n_levels();
    let mut p = vec![0.0; levels * m];
    let mut q = vec![0.0; levels * m];
    p[grid.n_time * m..].copy_from_slice(terminal);
    q[grid.n_time * m..].copy_from_slice(terminal);
    let mut stepper = Stepper::new(grid, sigma0);
    let mut extra = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in (0..grid.n_time).rev() {
        let (t, t_next) = (grid.time(i), grid.time(i + 1));
        let nu01 = curve.leave(Regime::Liquid, t);
        let b = curve.survival(Regime::Illiquid, t, t_next)?;
        let (p_lo, p_hi) = p.split_at_mut((i + 1) * m);
        let (q_lo, q_hi) = q.split_at_mut((i + 1) * m);
        let p_now = &mut p_lo[i * m..];
        let q_now = &mut q_lo[i * m..];
        let p_next = &p_hi[..m];
        let q_next = &q_hi[..m];
        liquid_step(
            &mut stepper,
            coupling,
            nu01,
            i,
            p_next,
            q_next,
            &mut extra,
            &mut rhs,
            p_now,
        )?;
        check_finite(i, p_now)?;
        illiquid_step(grid, coupling, b, i, p_now, q_next, q_now)?;
        check_finite(i, q_now)?;
    }
    Ok(Surfaces { p, q })
}

/// Marches the liquid equation alone against a prescribed illiquid surface
/// `q` (all levels), as in the single-shock model.
pub(crate) fn march_liquid(
    grid: &GridSpec,
    sigma0: f64,
    curve: &IntensityCurve,
    coupling: Coupling,
    q: &[f64],
) -> Result<Vec<f64>> {
    let m = grid.n_nodes();
    let mut p = vec![0.0; grid.n_levels() * m];
    p[grid.n_time * m..].copy_from_slice(&q[grid.n_time * m..]);
    let mut stepper = Stepper::new(grid, sigma0);
    let mut extra = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in (0..grid.n_time).rev() {
        let nu01 = curve.leave(Regime::Liquid, grid.time(i));
        let (p_lo, p_hi) = p.split_at_mut((i + 1) * m);
        let q_next = &q[(i + 1) * m..(i + 2) * m];
        let p_now = &mut p_lo[i * m..];
        liquid_step(
            &mut stepper,
            coupling,
            nu01,
            i,
            &p_hi[..m],
            q_next,
            &mut extra,
            &mut rhs,
            p_now,
        )?;
        check_finite(i, p_now)?;
    }
    Ok(p)
}

/// First-order (in risk aversion) correction `(p1, q1)` of the exponential
/// scheme about the linear solution `(p0, q0)`: the exact derivative of the
/// discrete buyer march at `gamma = 0`.
pub(crate) fn march_first_order(
    grid: &GridSpec,
    sigma0: f64,
    curve: &IntensityCurve,
    zeroth: &Surfaces,
) -> Result<Surfaces> {
    let m = grid.n_nodes();
    let levels = grid.n_levels();
    let mut p = vec![0.0; levels * m];
    let mut q = vec![0.0; levels * m];
    let mut stepper = Stepper::new(grid, sigma0);
    let mut extra = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let dt = grid.delta_t;
    for i in (0..grid.n_time).rev() {
        let (t, t_next) = (grid.time(i), grid.time(i + 1));
        let nu = curve.leave(Regime::Liquid, t);
        let b = curve.survival(Regime::Illiquid, t, t_next)?;
        let p0_now = &zeroth.p[i * m..(i + 1) * m];
        let p0_next = &zeroth.p[(i + 1) * m..(i + 2) * m];
        let q0_next = &zeroth.q[(i + 1) * m..(i + 2) * m];
        let (p_lo, p_hi) = p.split_at_mut((i + 1) * m);
        let (q_lo, q_hi) = q.split_at_mut((i + 1) * m);
        let p_now = &mut p_lo[i * m..];
        let q_now = &mut q_lo[i * m..];
        for j in 0..m {
            let x = q0_next[j] - p0_next[j];
            extra[j] = dt * nu;
            rhs[j] = p_hi[j] + dt * nu * (q_hi[j] - 0.5 * x * x - x * (p0_next[j] - p0_now[j]));
        }
        stepper.implicit(&extra, &rhs, p_now)?;
        check_finite(i, p_now)?;
        for j in 0..m {
            let y0 = q0_next[j] - p0_now[j];
            q_now[j] = p_now[j] + b * (q_hi[j] - p_now[j]) - 0.5 * b * (1.0 - b) * y0 * y0;
        }
        check_finite(i, q_now)?;
    }
    Ok(Surfaces { p, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Measure, ModelParams};

    #[test]
    fn linear_step_preserves_constants() {
        let p = ModelParams::default();
        let g = GridSpec::new(&p, 10.0, 50).unwrap();
        let curve = IntensityCurve::new(&p, Measure::Memm).unwrap();
        let term = vec![0.7; g.n_nodes()];
        let s = march_pair(&g, p.sigma0, &curve, Coupling::Linear, &term).unwrap();
        for v in s.p.iter().chain(&s.q) {
            assert!((v - 0.7).abs() < 1e-13);
        }
        let s = march_pair(&g, p.sigma0, &curve, Coupling::Exponential { gamma: 2.0 }, &term).unwrap();
        for v in s.p.iter().chain(&s.q) {
            assert!((v - 0.7).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_in_spot_is_exact() {
        // S itself is a martingale in the liquid regime and frozen in the
        // illiquid one, and the boundary rows are exact for it
        let p = ModelParams::default();
        let g = GridSpec::new(&p, 10.0, 100).unwrap();
        let curve = IntensityCurve::new(&p, Measure::Mmm).unwrap();
        let term = g.spots();
        let s = march_pair(&g, p.sigma0, &curve, Coupling::Linear, &term).unwrap();
        for (got, want) in s.p[..g.n_nodes()].iter().zip(&term) {
            assert!((got - want).abs() < 1e-3 * want, "{got} {want}");
        }
    }

    #[test]
    fn overflow_is_reported() {
        let p = ModelParams::default();
        let g = GridSpec::new(&p, 10.0, 20).unwrap();
        let curve = IntensityCurve::new(&p, Measure::Memm).unwrap();
        let term: Vec<f64> = g.spots().iter().map(|s| 1e6 * (s - 10.0).max(0.0)).collect();
        let r = march_pair(&g, p.sigma0, &curve, Coupling::Exponential { gamma: 1.0 }, &term);
        assert!(matches!(r, Err(Error::Overflow { .. })));
    }
}
