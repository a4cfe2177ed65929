use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{solitary_wave_init_with, EbConfig, EbState, Generator, Sponge, DEFAULT_B2};
use crate::bbm::trapezoid;
use crate::error::{Error, Result};
use crate::numcore::{BoundaryKind, Grid1D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EbBenchmark {
    SolitaryBar,
    MonochromaticBar,
}

impl FromStr for EbBenchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solitary_bar" => Ok(Self::SolitaryBar),
            "monochromatic_bar" => Ok(Self::MonochromaticBar),
            _ => Err(Error::config(format!("unknown EB benchmark '{s}'"))),
        }
    }
}

/// Optional replacements for benchmark defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EbOverrides {
    pub h0: Option<f64>,
    pub a0: Option<f64>,
    pub g: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub nh: Option<usize>,
    pub d_cip: Option<f64>,
    /// Bar crest height; `0` gives a flat bottom.
    pub bar_height: Option<f64>,
    /// Initial crest position of the solitary wave.
    pub x_center: Option<f64>,
}

/// Published setup for `name`, returning the configuration and initial state.
pub fn eb_benchmark(name: EbBenchmark, ov: &EbOverrides) -> Result<(EbConfig, EbState)> {
    let nh = ov.nh.unwrap_or(2000);
    let g = ov.g.unwrap_or(9.81);
    let b2 = ov.b2.unwrap_or(DEFAULT_B2);
    let b1 = ov.b1.unwrap_or(b2 + 1.0 / 3.0);
    let (x0, x1, bc, a0, h0, bar, breaks, t_end) = match name {
        EbBenchmark::SolitaryBar => (-20.0, 30.0, BoundaryKind::Periodic, 0.2, 1.0, 0.2, [11.0, 17.0, 19.0, 22.0], 18.0),
        EbBenchmark::MonochromaticBar => {
            (0.0, 35.0, BoundaryKind::Extrapolated, 0.027, 0.5, 0.3, [15.0, 21.0, 23.0, 26.0], 40.0)
        }
    };
    let grid = Grid1D::new(x0, x1, nh, bc)?;
    let a0 = ov.a0.unwrap_or(a0);
    let h0 = ov.h0.unwrap_or(h0);
    let bar = ov.bar_height.unwrap_or(bar);
    let bathy = grid.nodes().iter().map(|&x| trapezoid(x, bar, breaks)).collect();
    let (generator, sponges) = match name {
        EbBenchmark::SolitaryBar => (None, vec![]),
        EbBenchmark::MonochromaticBar => (
            Some(Generator { x_iwg: 10.0, period: 2.525, alpha_iwg: 4.0, amplitude: a0 }),
            vec![
                Sponge { x_s1: 5.0, x_s2: 0.0, n1: 1e-3, n2: 10.0 },
                Sponge { x_s1: 30.0, x_s2: 35.0, n1: 1e-3, n2: 10.0 },
            ],
        ),
    };
    let config = EbConfig {
        h0,
        g,
        a0,
        b1,
        b2,
        bathy,
        cfl: ov.cfl.unwrap_or(0.5),
        t_end: ov.t_end.unwrap_or(t_end),
        d_cip: ov.d_cip.unwrap_or(1.0),
        generator,
        sponges,
        grid,
    };
    config.validate()?;
    let state = match name {
        EbBenchmark::SolitaryBar => {
            let (eta, q, _) =
                solitary_wave_init_with(a0, h0, g, b1, b2, &config.grid, ov.x_center.unwrap_or(5.0))?;
            EbState { eta, q, t: 0.0 }
        }
        EbBenchmark::MonochromaticBar => EbState::rest(nh),
    };
    Ok((config, state))
}
