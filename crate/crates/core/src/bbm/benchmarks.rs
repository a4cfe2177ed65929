use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BbmConfig;
use crate::error::{Error, Result};
use crate::numcore::{BoundaryKind, Grid1D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbmBenchmark {
    Monochromatic,
    UndularBore,
    SolitaryBar,
}

impl FromStr for BbmBenchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monochromatic" => Ok(Self::Monochromatic),
            "undular_bore" => Ok(Self::UndularBore),
            "solitary_bar" => Ok(Self::SolitaryBar),
            _ => Err(Error::config(format!("unknown BBM benchmark '{s}'"))),
        }
    }
}

/// Optional replacements for benchmark defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbmOverrides {
    pub h0: Option<f64>,
    pub a0: Option<f64>,
    pub g: Option<f64>,
    pub p: Option<f64>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub nh: Option<usize>,
    pub d_cip: Option<f64>,
    /// Named alternative initial condition, e.g. `two_cosine`.
    pub initial: Option<String>,
}

/// Trapezoid through `(x1, 0), (x2, top), (x3, top), (x4, 0)`.
pub(crate) fn trapezoid(x: f64, top: f64, [x1, x2, x3, x4]: [f64; 4]) -> f64 {
    if x <= x1 || x >= x4 {
        0.0
    } else if x < x2 {
        top * (x - x1) / (x2 - x1)
    } else if x <= x3 {
        top
    } else {
        top * (x4 - x) / (x4 - x3)
    }
}

/// Published setup for `name`, returning the configuration and initial surface.
pub fn bbm_benchmark(name: BbmBenchmark, ov: &BbmOverrides) -> Result<(BbmConfig, Vec<f64>)> {
    let nh = ov.nh.unwrap_or(2000);
    let (x0, x1, bc, a0, cfl, t_end) = match name {
        BbmBenchmark::Monochromatic => (0.0, 20.0 * PI, BoundaryKind::Periodic, 0.04, 0.2, 200.0),
        BbmBenchmark::UndularBore => (0.0, 20.0 * PI, BoundaryKind::DirichletLeftLifted, 0.04, 0.1, 20.0),
        BbmBenchmark::SolitaryBar => (0.0, 100.0, BoundaryKind::Periodic, 0.1, 0.1, 60.0),
    };
    let grid = Grid1D::new(x0, x1, nh, bc)?;
    let a0 = ov.a0.unwrap_or(a0);
    let xs = grid.nodes();
    let bathy: Vec<f64> = match name {
        BbmBenchmark::SolitaryBar => xs.iter().map(|&x| trapezoid(x, 0.07, [45.0, 55.0, 75.0, 80.0])).collect(),
        _ => vec![0.0; nh],
    };
    let eta0: Vec<f64> = match (name, ov.initial.as_deref()) {
        (_, Some("two_cosine")) => xs
            .iter()
            .map(|&x| -1.2 * a0 * (0.4 * PI * (x - 2.0)).cos() + a0 / 10.0 * (0.8 * PI * x).cos())
            .collect(),
        (_, Some(other)) => return Err(Error::config(format!("unknown initial condition '{other}'"))),
        (BbmBenchmark::Monochromatic, None) => xs.iter().map(|&x| a0 * (x / 10.0).cos()).collect(),
        (BbmBenchmark::UndularBore, None) => {
            xs.iter().map(|&x| a0 * (1.0 - 1.0 / (1.0 + (-4.0 * (x - 5.0)).exp()))).collect()
        }
        (BbmBenchmark::SolitaryBar, None) => xs.iter().map(|&x| a0 / ((x - 22.0) / 5.0).cosh()).collect(),
    };
    let config = BbmConfig {
        h0: ov.h0.unwrap_or(1.0),
        g: ov.g.unwrap_or(9.81),
        a0,
        p: ov.p.unwrap_or(0.0),
        cfl: ov.cfl.unwrap_or(cfl),
        t_end: ov.t_end.unwrap_or(t_end),
        grid,
        bathy,
        d_cip: ov.d_cip.unwrap_or(1.0),
    };
    config.validate()?;
    Ok((config, eta0))
}
