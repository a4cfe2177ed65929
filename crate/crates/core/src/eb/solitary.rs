//! Solitary wave of the enhanced Boussinesq equations, by shooting from the crest.

use super::{DEFAULT_B1, DEFAULT_B2};
use crate::numcore::Grid1D;
use crate::error::{Error, Result};

/// Celerity of the solitary wave of amplitude `a0` on depth `h0`.
pub fn solitary_celerity(a0: f64, h0: f64, g: f64) -> Result<f64> {
    if !(a0 > 0.0 && h0 > 0.0 && g > 0.0) {
        return Err(Error::config(format!("solitary wave needs a0, h0, g > 0 (a0 = {a0}, h0 = {h0})")));
    }
    let eps = a0 / h0;
    let ratio = 0.5 * eps * eps * (1.0 + eps / 3.0) / (eps - eps.ln_1p());
    Ok((g * h0 * ratio).sqrt())
}

/// Half profile tabulated from the crest outward.
#[derive(Clone, Debug)]
pub struct SolitaryWave {
    pub a0: f64,
    pub celerity: f64,
    step: f64,
    eta: Vec<f64>,
    slope: Vec<f64>,
}

impl SolitaryWave {
    /// Integrates the travelling-wave ODE with RK4 at spacing `step`.
    pub fn new(a0: f64, h0: f64, g: f64, b1: f64, b2: f64, step: f64, max_len: f64) -> Result<Self> {
        let c = solitary_celerity(a0, h0, g)?;
        let c2 = c * c;
        let k = c2 * b1 * h0 * h0 - g * b2 * h0.powi(3);
        if !(k > 0.0) {
            return Err(Error::config(format!("solitary wave ODE degenerate: dispersive coefficient {k}")));
        }
        let accel = |e: f64| (c2 * e - c2 * e * e / (h0 + e) - g * h0 * e - 0.5 * g * e * e) / k;
        let f = |[e, s]: [f64; 2]| [s, accel(e)];
        let mut eta = vec![a0];
        let mut slope = vec![0.0];
        let mut y = [a0, 0.0];
        let n_max = (max_len / step).ceil() as usize;
        for _ in 0..n_max {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * step * k1[0], y[1] + 0.5 * step * k1[1]]);
            let k3 = f([y[0] + 0.5 * step * k2[0], y[1] + 0.5 * step * k2[1]]);
            let k4 = f([y[0] + step * k3[0], y[1] + step * k3[1]]);
            for i in 0..2 {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if y[0] < 1e-10 * a0 || y[1] > 0.0 {
                break;
            }
            eta.push(y[0]);
            slope.push(y[1]);
        }
        Ok(Self { a0, celerity: c, step, eta, slope })
    }

    /// Elevation at distance `d` from the crest.
    pub fn eval(&self, d: f64) -> f64 {
        let s = d.abs() / self.step;
        let i = s.floor() as usize;
        if i + 1 >= self.eta.len() {
            return 0.0;
        }
        let t = s - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h = self.step;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.eta[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.eta[i + 1]
            + (t3 - t2) * h * self.slope[i + 1]
    }

    /// Distance over which the profile was resolved.
    pub fn extent(&self) -> f64 {
        (self.eta.len() - 1) as f64 * self.step
    }
}

/// Solitary wave centred at `x_center`, moving right, with the default
/// dispersion constants. Returns `(eta0, q0, C)` with `q0 = C eta0`.
pub fn solitary_wave_init(a0: f64, h0: f64, g: f64, grid: &Grid1D, x_center: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    solitary_wave_init_with(a0, h0, g, DEFAULT_B1, DEFAULT_B2, grid, x_center)
}

pub fn solitary_wave_init_with(
    a0: f64,
    h0: f64,
    g: f64,
    b1: f64,
    b2: f64,
    grid: &Grid1D,
    x_center: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let wave = SolitaryWave::new(a0, h0, g, b1, b2, grid.dx / 10.0, grid.length())?;
    let eta: Vec<f64> = grid.nodes().iter().map(|&x| wave.eval(grid.signed_distance(x, x_center))).collect();
    let q = eta.iter().map(|e| wave.celerity * e).collect();
    Ok((eta, q, wave.celerity))
}
