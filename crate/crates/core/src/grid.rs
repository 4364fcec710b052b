//! Space-time mesh in log-price and gridded price surfaces.

use crate::error::{Error, Result};
use crate::model::{ModelParams, Payoff, Regime};

/// Time steps per year of the default grid.
pub const DEFAULT_STEPS_PER_YEAR: f64 = 2000.0;
/// Half-width of the default log-price domain in units of `sigma0 sqrt(T)`.
pub const DEFAULT_WIDTH_SD: f64 = 6.0;

/// Uniform mesh `t_i = i dt`, `z_j = z_min + j dz`, `z = ln S`, with
/// `dz^2 = sigma0^2 dt + (sigma0^2 dt / 2)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of time steps `N`.
    pub n_time: usize,
    /// Number of space intervals `M`; there are `M + 1` nodes.
    pub n_space: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub delta_t: f64,
    pub delta_z: f64,
    pub maturity: f64,
}

fn space_step(sigma: f64, dt: f64) -> f64 {
    let s2 = sigma * sigma;
    (s2 * dt + 0.25 * s2 * s2 * dt * dt).sqrt()
}

impl GridSpec {
    /// Grid with `n_time` steps covering `ln K +- 6 sigma0 sqrt(T)`, placed so
    /// that the strike falls in the middle of a cell.
    pub fn new(params: &ModelParams, strike: f64, n_time: usize) -> Result<Self> {
        Self::with_width(params, strike, n_time, DEFAULT_WIDTH_SD)
    }

    /// Like [`GridSpec::new`] with a domain of `+- width_sd` standard deviations.
    pub fn with_width(params: &ModelParams, strike: f64, n_time: usize, width_sd: f64) -> Result<Self> {
        params.validate()?;
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::InvalidParam {
                name: "K",
                value: strike,
                reason: "must be positive",
            });
        }
        if !(width_sd.is_finite() && width_sd > 0.0) {
            return Err(Error::InvalidParam {
                name: "width",
                value: width_sd,
                reason: "must be positive",
            });
        }
        if n_time == 0 {
            return Err(Error::GridTooCoarse("no time steps".into()));
        }
        let dt = params.maturity / n_time as f64;
        let dz = space_step(params.sigma0, dt);
        let k = (width_sd * params.sigma0 * params.maturity.sqrt() / dz).ceil() as usize;
        let n_space = 2 * k + 1;
        let z_min = strike.ln() - (k as f64 + 0.5) * dz;
        let g = GridSpec {
            n_time,
            n_space,
            z_min,
            z_max: z_min + n_space as f64 * dz,
            delta_t: dt,
            delta_z: dz,
            maturity: params.maturity,
        };
        g.check_space()?;
        Ok(g)
    }

    /// Default grid: 2000 steps per year.
    pub fn default_for(params: &ModelParams, strike: f64) -> Result<Self> {
        let n = (DEFAULT_STEPS_PER_YEAR * params.maturity).ceil().max(1.0) as usize;
        Self::new(params, strike, n)
    }

    /// Grid on explicit log-price bounds. `z_max` is moved up to the first
    /// node at or beyond it.
    pub fn from_bounds(params: &ModelParams, strike: f64, n_time: usize, z_min: f64, z_max: f64) -> Result<Self> {
        params.validate()?;
        if n_time == 0 {
            return Err(Error::GridTooCoarse("no time steps".into()));
        }
        if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
            return Err(Error::GridTooCoarse(format!("empty domain [{z_min}, {z_max}]")));
        }
        let ln_k = strike.ln();
        if !(z_min < ln_k && ln_k < z_max) {
            return Err(Error::GridTooCoarse(format!(
                "ln K = {ln_k} is not inside ({z_min}, {z_max})"
            )));
        }
        let dt = params.maturity / n_time as f64;
        let dz = space_step(params.sigma0, dt);
        let n_space = ((z_max - z_min) / dz - 1e-9).ceil().max(1.0) as usize;
        let g = GridSpec {
            n_time,
            n_space,
            z_min,
            z_max: z_min + n_space as f64 * dz,
            delta_t: dt,
            delta_z: dz,
            maturity: params.maturity,
        };
        g.check_space()?;
        Ok(g)
    }

    fn check_space(&self) -> Result<()> {
        if self.n_space < 3 {
            return Err(Error::GridTooCoarse(format!(
                "{} space intervals, at least 3 needed",
                self.n_space
            )));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_space + 1
    }

    pub fn n_levels(&self) -> usize {
        self.n_time + 1
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.delta_z
    }

    pub fn spot(&self, j: usize) -> f64 {
        self.z(j).exp()
    }

    pub fn spots(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.spot(j)).collect()
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_time {
            self.maturity
        } else {
            i as f64 * self.delta_t
        }
    }

    /// Same domain with the time step halved (and `dz` coupled to it).
    pub fn refined(&self, params: &ModelParams, strike: f64) -> Result<Self> {
        Self::new(params, strike, 2 * self.n_time)
    }

    fn z_inside(&self, z: f64) -> bool {
        let slack = 1e-12 * self.delta_z;
        z >= self.z_min - slack && z <= self.z_max + slack
    }
}

/// Values of one regime on every mesh point, stored by time level.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    pub grid: GridSpec,
    pub regime: Regime,
    pub payoff: Payoff,
    values: Vec<f64>,
}

impl PriceSurface {
    pub(crate) fn from_values(grid: GridSpec, regime: Regime, payoff: Payoff, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_levels() * grid.n_nodes());
        PriceSurface {
            grid,
            regime,
            payoff,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time level `i` (`t = i dt`) across all nodes.
    pub fn level(&self, i: usize) -> &[f64] {
        let m = self.grid.n_nodes();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_nodes() + j]
    }

    /// Node indices excluding the two boundary nodes.
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.grid.n_space
    }

    fn interp_level(&self, i: usize, z: f64) -> f64 {
        let g = &self.grid;
        let row = self.level(i);
        let x = (z - g.z_min) / g.delta_z;
        let j0 = (x.floor() as isize - 1).clamp(0, g.n_space as isize - 3) as usize;
        let mut v = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (j0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            v += w * row[j0 + a];
        }
        v
    }

    fn locate(&self, t: f64, spot: f64) -> Result<(f64, usize, f64)> {
        let g = &self.grid;
        let z = spot.ln();
        let slack = 1e-12 * g.maturity;
        let t_ok = (-slack..=g.maturity + slack).contains(&t);
        if !t_ok || spot.is_nan() || spot <= 0.0 || !g.z_inside(z) {
            return Err(Error::OutsideGrid { t, spot });
        }
        let x = (t / g.delta_t).clamp(0.0, g.n_time as f64);
        let i = (x.floor() as usize).min(g.n_time.saturating_sub(1));
        Ok((z, i, x - i as f64))
    }

    /// Value at `(t, S)`: cubic Lagrange interpolation in `ln S`, linear in `t`.
    pub fn at(&self, t: f64, spot: f64) -> Result<f64> {
        let (z, i, w) = self.locate(t, spot)?;
        let v0 = self.interp_level(i, z);
        if w == 0.0 {
            return Ok(v0);
        }
        Ok((1.0 - w) * v0 + w * self.interp_level(i + 1, z))
    }

    /// Quote at `t = 0`.
    pub fn quote(&self, spot: f64) -> Result<f64> {
        self.at(0.0, spot)
    }

    /// `dV/dS` by a centered difference of width `2 dz` in `ln S`.
    pub fn delta(&self, t: f64, spot: f64) -> Result<f64> {
        let dz = self.grid.delta_z;
        let up = self
            .at(t, spot * dz.exp())
            .map_err(|_| Error::OutsideGrid { t, spot })?;
        let dn = self
            .at(t, spot * (-dz).exp())
            .map_err(|_| Error::OutsideGrid { t, spot })?;
        Ok((up - dn) / (2.0 * dz * spot))
    }

    /// `(S_j, V(t_i, S_j))` pairs at time level `i`.
    pub fn slice(&self, i: usize) -> Vec<(f64, f64)> {
        self.level(i)
            .iter()
            .enumerate()
            .map(|(j, &v)| (self.grid.spot(j), v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PayoffKind;

    #[test]
    fn default_grid_shape() {
        let p = ModelParams::default();
        let g = GridSpec::default_for(&p, 10.0).unwrap();
        assert_eq!(g.n_time, 2000);
        assert!((g.delta_z - 0.006_708_7).abs() < 1e-6);
        let lhs = g.delta_z * g.delta_z;
        let rhs = 0.09 * g.delta_t + (0.045 * g.delta_t).powi(2);
        assert!((lhs - rhs).abs() < 1e-18);
        assert!(g.z_min <= 10f64.ln() - 1.8 && g.z_max >= 10f64.ln() + 1.8);
        assert!((536..=540).contains(&g.n_nodes()));
        // strike sits mid-cell
        let x = (10f64.ln() - g.z_min) / g.delta_z;
        assert!((x - x.floor() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn too_coarse_rejected() {
        let p = ModelParams::default();
        let r = GridSpec::from_bounds(&p, 10.0, 100, 2.30, 2.31);
        assert!(matches!(r, Err(Error::GridTooCoarse(_))));
        let g = GridSpec::from_bounds(&p, 10.0, 100, 2.0, 2.6).unwrap();
        assert!(g.z_max >= 2.6);
        assert!(GridSpec::from_bounds(&p, 10.0, 100, 2.5, 2.6).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let p = ModelParams::default();
        let g = GridSpec::new(&p, 10.0, 20).unwrap();
        let f = |t: f64, z: f64| (1.0 + t) * (z * z * z - 2.0 * z + 0.5);
        let mut vals = Vec::new();
        for i in 0..g.n_levels() {
            for j in 0..g.n_nodes() {
                vals.push(f(g.time(i), g.z(j)));
            }
        }
        let pay = Payoff::new(PayoffKind::VanillaCall, 10.0).unwrap();
        let s = PriceSurface::from_values(g, Regime::Liquid, pay, vals);
        for spot in [7.3, 10.0, 12.9] {
            let t = 0.37;
            let v = s.at(t, spot).unwrap();
            assert!((v - f(t, spot.ln())).abs() < 1e-10);
        }
        assert!(s.at(0.0, 1e-3).is_err());
        assert!(s.at(1.5, 10.0).is_err());
    }
}
